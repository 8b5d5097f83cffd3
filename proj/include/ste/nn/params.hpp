#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ste/nn/tensor.hpp"
#include "ste/rng.hpp"

namespace ste::nn {

template <class Real>
struct Param {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;
  Tensor<Real> m, v;  // Adam moments
  bool has_grad = false;
};

// Named parameters with their optimizer state. Addresses are stable, so
// graphs may hold references across additions.
template <class Real>
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet& o) { *this = o; }
  ParamSet& operator=(const ParamSet& o);
  ParamSet(ParamSet&&) noexcept = default;
  ParamSet& operator=(ParamSet&&) noexcept = default;

  Param<Real>& add(const std::string& name, const Shape& shape);
  Param<Real>& get(const std::string& name);
  const Param<Real>& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  Param<Real>& at(std::size_t i) { return *params_[i]; }
  const Param<Real>& at(std::size_t i) const { return *params_[i]; }
  std::size_t num_values() const;

  std::int64_t step = 0;

  void zero_grad();
  // FNV-1a over names, shapes and raw values (not optimizer state).
  std::uint64_t hash() const;

 private:
  std::vector<std::unique_ptr<Param<Real>>> params_;
};

template <class To, class From>
ParamSet<To> cast_params(const ParamSet<From>& p);

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

// Bias-corrected Adam over every parameter that received a gradient since the
// last step; clears gradients afterwards. Throws ContractError when no
// parameter has a gradient and NumericError (leaving the set untouched) when
// a gradient is not finite.
template <class Real>
void adam_step(ParamSet<Real>& ps, double lr, const AdamConfig& cfg = {});

// Kaiming-uniform: U(-b, b) with b = sqrt(6 / fan_in).
template <class Real>
void init_kaiming(Tensor<Real>& t, int fan_in, Rng& rng);
template <class Real>
void init_uniform(Tensor<Real>& t, double bound, Rng& rng);

}  // namespace ste::nn
