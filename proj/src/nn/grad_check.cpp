#include "ste/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ste::nn {

template <class Real>
GradCheckResult grad_check(ParamSet<Real>& ps, const std::function<Var(Graph<Real>&)>& loss,
                           const GradCheckOptions& opt) {
  if (opt.eps <= 0 || opt.stride == 0) throw InvalidArgument("grad_check: bad options");
  ps.zero_grad();
  {
    Graph<Real> g(opt.exec);
    g.backward(loss(g));
  }
  auto eval = [&] {
    Graph<Real> g(opt.exec);
    return static_cast<double>(g.scalar(loss(g)));
  };

  GradCheckResult r;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Param<Real>& p = ps.at(i);
    for (std::size_t k = 0; k < p.value.size(); k += opt.stride) {
      const double analytic = p.has_grad ? static_cast<double>(p.grad.data[k]) : 0.0;
      const Real orig = p.value.data[k];
      p.value.data[k] = static_cast<Real>(orig + opt.eps);
      const double hi_x = static_cast<double>(p.value.data[k]);
      const double hi = eval();
      p.value.data[k] = static_cast<Real>(orig - opt.eps);
      const double lo_x = static_cast<double>(p.value.data[k]);
      const double lo = eval();
      p.value.data[k] = orig;
      // Divide by the step actually taken after rounding to storage precision.
      const double numeric = (hi - lo) / (hi_x - lo_x);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.abs_floor});
      const double err = std::abs(analytic - numeric) / denom;
      ++r.checked;
      if (err > r.max_rel_error || r.worst.empty()) {
        r.max_rel_error = std::max(r.max_rel_error, err);
        if (err >= r.max_rel_error) r.worst = p.name + "[" + std::to_string(k) + "]";
      }
    }
  }
  ps.zero_grad();
  return r;
}

template GradCheckResult grad_check<float>(ParamSet<float>&, const std::function<Var(Graph<float>&)>&,
                                           const GradCheckOptions&);
template GradCheckResult grad_check<double>(ParamSet<double>&,
                                            const std::function<Var(Graph<double>&)>&,
                                            const GradCheckOptions&);

}  // namespace ste::nn
