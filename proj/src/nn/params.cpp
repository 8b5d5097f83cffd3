#include "ste/nn/params.hpp"

#include <cmath>
#include <cstring>

namespace ste::nn {

template <class Real>
ParamSet<Real>& ParamSet<Real>::operator=(const ParamSet& o) {
  if (this == &o) return *this;
  params_.clear();
  for (const auto& p : o.params_) params_.push_back(std::make_unique<Param<Real>>(*p));
  step = o.step;
  return *this;
}

template <class Real>
Param<Real>& ParamSet<Real>::add(const std::string& name, const Shape& shape) {
  if (name.empty()) throw InvalidArgument("parameter name is empty");
  if (contains(name)) throw InvalidArgument("duplicate parameter '" + name + "'");
  for (int d : shape)
    if (d <= 0) throw InvalidArgument("parameter '" + name + "' has shape " + shape_str(shape));
  auto p = std::make_unique<Param<Real>>();
  p->name = name;
  p->value = Tensor<Real>(shape);
  p->m = Tensor<Real>(shape);
  p->v = Tensor<Real>(shape);
  params_.push_back(std::move(p));
  return *params_.back();
}

template <class Real>
Param<Real>& ParamSet<Real>::get(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  throw InvalidArgument("no parameter named '" + name + "'");
}

template <class Real>
const Param<Real>& ParamSet<Real>::get(const std::string& name) const {
  return const_cast<ParamSet*>(this)->get(name);
}

template <class Real>
bool ParamSet<Real>::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return true;
  return false;
}

template <class Real>
std::size_t ParamSet<Real>::num_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

template <class Real>
void ParamSet<Real>::zero_grad() {
  for (auto& p : params_) {
    p->grad = Tensor<Real>();
    p->has_grad = false;
  }
}

namespace {

struct Fnv {
  std::uint64_t h = 1469598103934665603ULL;
  void bytes(const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  }
};

}  // namespace

template <class Real>
std::uint64_t ParamSet<Real>::hash() const {
  Fnv f;
  for (const auto& p : params_) {
    f.bytes(p->name.data(), p->name.size());
    for (int d : p->value.shape) f.bytes(&d, sizeof d);
    f.bytes(p->value.data.data(), p->value.data.size() * sizeof(Real));
  }
  return f.h;
}

template <class To, class From>
ParamSet<To> cast_params(const ParamSet<From>& ps) {
  ParamSet<To> out;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Param<From>& p = ps.at(i);
    Param<To>& q = out.add(p.name, p.value.shape);
    q.value = cast<To>(p.value);
    q.m = cast<To>(p.m);
    q.v = cast<To>(p.v);
    if (!p.grad.data.empty()) q.grad = cast<To>(p.grad);
    q.has_grad = p.has_grad;
  }
  out.step = ps.step;
  return out;
}

template <class Real>
void adam_step(ParamSet<Real>& ps, double lr, const AdamConfig& cfg) {
  bool any = false;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Param<Real>& p = ps.at(i);
    if (!p.has_grad) continue;
    any = true;
    for (Real g : p.grad.data)
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in '" + p.name + "'");
  }
  if (!any) throw ContractError("adam_step: no parameter has a gradient");

  const std::int64_t t = ps.step + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Param<Real>& p = ps.at(i);
    if (!p.has_grad) continue;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad.data[k];
      const double m = cfg.beta1 * p.m.data[k] + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * p.v.data[k] + (1.0 - cfg.beta2) * g * g;
      p.m.data[k] = static_cast<Real>(m);
      p.v.data[k] = static_cast<Real>(v);
      const double mh = m / bc1, vh = v / bc2;
      p.value.data[k] = static_cast<Real>(p.value.data[k] - lr * mh / (std::sqrt(vh) + cfg.eps));
    }
  }
  ps.step = t;
  ps.zero_grad();
}

template <class Real>
void init_uniform(Tensor<Real>& t, double bound, Rng& rng) {
  for (auto& v : t.data) v = static_cast<Real>(rng.uniform(-bound, bound));
}

template <class Real>
void init_kaiming(Tensor<Real>& t, int fan_in, Rng& rng) {
  if (fan_in <= 0) throw InvalidArgument("init_kaiming: fan_in must be positive");
  init_uniform(t, std::sqrt(6.0 / fan_in), rng);
}

template class ParamSet<float>;
template class ParamSet<double>;
template ParamSet<double> cast_params<double, float>(const ParamSet<float>&);
template ParamSet<float> cast_params<float, double>(const ParamSet<double>&);
template void adam_step<float>(ParamSet<float>&, double, const AdamConfig&);
template void adam_step<double>(ParamSet<double>&, double, const AdamConfig&);
template void init_uniform<float>(Tensor<float>&, double, Rng&);
template void init_uniform<double>(Tensor<double>&, double, Rng&);
template void init_kaiming<float>(Tensor<float>&, int, Rng&);
template void init_kaiming<double>(Tensor<double>&, int, Rng&);

}  // namespace ste::nn
