#pragma once

#include <functional>
#include <string>

#include "ste/nn/graph.hpp"

namespace ste::nn {

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst;  // "name[index]"
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double eps = 1e-4;
  // Entries whose analytic and numeric magnitudes both fall below this are
  // compared absolutely instead of relatively.
  double abs_floor = 1e-3;
  // Check every k-th entry of each parameter (1 = all).
  std::size_t stride = 1;
  Exec exec = Exec::serial;
};

// Builds the scalar loss with `loss`, runs backward, then compares every
// (strided) parameter entry against central finite differences.
template <class Real>
GradCheckResult grad_check(ParamSet<Real>& ps, const std::function<Var(Graph<Real>&)>& loss,
                           const GradCheckOptions& opt = {});

extern template GradCheckResult grad_check<float>(ParamSet<float>&,
                                                  const std::function<Var(Graph<float>&)>&,
                                                  const GradCheckOptions&);
extern template GradCheckResult grad_check<double>(ParamSet<double>&,
                                                   const std::function<Var(Graph<double>&)>&,
                                                   const GradCheckOptions&);

}  // namespace ste::nn
