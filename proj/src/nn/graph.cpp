#include "ste/nn/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace ste::nn {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace {

template <class Real>
using MatMap = Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class Real>
using CMatMap = Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

struct ConvGeom {
  int n, ci, h, w, co, k, s, p, ho, wo;
  int kdim() const { return ci * k * k; }
  int hw() const { return ho * wo; }
};

// Output columns [lo, hi) read in-bounds input for kernel offset k.
inline void valid_range(int k, const ConvGeom& g, int extent, int out, int& lo, int& hi) {
  // need 0 <= o*s - p + k < extent
  lo = std::max(0, (g.p - k + g.s - 1) / g.s);
  hi = std::min(out, (extent - 1 + g.p - k) / g.s + 1);
  if (hi < lo) hi = lo;
}

template <class Real>
void im2col(const Real* x, const ConvGeom& g, Real* col) {
  for (int c = 0; c < g.ci; ++c)
    for (int ky = 0; ky < g.k; ++ky) {
      int ylo, yhi;
      valid_range(ky, g, g.h, g.ho, ylo, yhi);
      for (int kx = 0; kx < g.k; ++kx) {
        int xlo, xhi;
        valid_range(kx, g, g.w, g.wo, xlo, xhi);
        Real* row = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * g.hw();
        std::fill(row, row + ylo * g.wo, Real(0));
        for (int oy = ylo; oy < yhi; ++oy) {
          Real* r = row + oy * g.wo;
          const Real* src = x + (static_cast<std::size_t>(c) * g.h + oy * g.s - g.p + ky) * g.w - g.p + kx;
          std::fill(r, r + xlo, Real(0));
          if (g.s == 1) {
            std::copy(src + xlo, src + xhi, r + xlo);
          } else {
            for (int ox = xlo; ox < xhi; ++ox) r[ox] = src[ox * g.s];
          }
          std::fill(r + xhi, r + g.wo, Real(0));
        }
        std::fill(row + yhi * g.wo, row + g.hw(), Real(0));
      }
    }
}

template <class Real>
void col2im_add(const Real* col, const ConvGeom& g, Real* dx) {
  for (int c = 0; c < g.ci; ++c)
    for (int ky = 0; ky < g.k; ++ky) {
      int ylo, yhi;
      valid_range(ky, g, g.h, g.ho, ylo, yhi);
      for (int kx = 0; kx < g.k; ++kx) {
        int xlo, xhi;
        valid_range(kx, g, g.w, g.wo, xlo, xhi);
        const Real* row = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * g.hw();
        for (int oy = ylo; oy < yhi; ++oy) {
          const Real* r = row + oy * g.wo;
          Real* dst = dx + (static_cast<std::size_t>(c) * g.h + oy * g.s - g.p + ky) * g.w - g.p + kx;
          if (g.s == 1) {
            for (int ox = xlo; ox < xhi; ++ox) dst[ox] += r[ox];
          } else {
            for (int ox = xlo; ox < xhi; ++ox) dst[ox * g.s] += r[ox];
          }
        }
      }
    }
}

// Direct stride-1 convolution for layers with very few output channels, where
// im2col traffic dominates the tiny GEMM.
template <class Real>
void direct_fwd(const Real* x, const Real* w, const ConvGeom& g, Real* out) {
  std::fill(out, out + static_cast<std::size_t>(g.co) * g.hw(), Real(0));
  for (int co = 0; co < g.co; ++co)
    for (int c = 0; c < g.ci; ++c)
      for (int ky = 0; ky < g.k; ++ky) {
        int ylo, yhi;
        valid_range(ky, g, g.h, g.ho, ylo, yhi);
        for (int kx = 0; kx < g.k; ++kx) {
          int xlo, xhi;
          valid_range(kx, g, g.w, g.wo, xlo, xhi);
          const Real wv = w[((co * g.ci + c) * g.k + ky) * g.k + kx];
          for (int oy = ylo; oy < yhi; ++oy) {
            Real* o = out + (static_cast<std::size_t>(co) * g.ho + oy) * g.wo;
            const Real* src = x + (static_cast<std::size_t>(c) * g.h + oy - g.p + ky) * g.w - g.p + kx;
            for (int ox = xlo; ox < xhi; ++ox) o[ox] += wv * src[ox];
          }
        }
      }
}

template <class Real>
void direct_bwd(const Real* x, const Real* w, const Real* go, const ConvGeom& g, Real* dw, Real* dx) {
  std::vector<Real> lane(g.wo);  // per-column partial sums keep the dW loop vectorizable
  for (int co = 0; co < g.co; ++co)
    for (int c = 0; c < g.ci; ++c)
      for (int ky = 0; ky < g.k; ++ky) {
        int ylo, yhi;
        valid_range(ky, g, g.h, g.ho, ylo, yhi);
        for (int kx = 0; kx < g.k; ++kx) {
          int xlo, xhi;
          valid_range(kx, g, g.w, g.wo, xlo, xhi);
          const std::size_t widx = ((co * g.ci + c) * g.k + ky) * g.k + kx;
          const Real wv = w[widx];
          std::fill(lane.begin(), lane.end(), Real(0));
          for (int oy = ylo; oy < yhi; ++oy) {
            const Real* gr = go + (static_cast<std::size_t>(co) * g.ho + oy) * g.wo;
            const std::size_t off = (static_cast<std::size_t>(c) * g.h + oy - g.p + ky) * g.w - g.p + kx;
            if (dw) {
              const Real* xs = x + off;
              Real* ln = lane.data();
              for (int ox = xlo; ox < xhi; ++ox) ln[ox] += gr[ox] * xs[ox];
            }
            if (dx) {
              Real* d = dx + off;
              for (int ox = xlo; ox < xhi; ++ox) d[ox] += wv * gr[ox];
            }
          }
          if (dw) {
            Real acc = 0;
            for (int ox = 0; ox < g.wo; ++ox) acc += lane[ox];
            dw[widx] = acc;
          }
        }
      }
}

template <class Real>
Real sigmoid_of(Real z) {
  if (z >= 0) return Real(1) / (Real(1) + std::exp(-z));
  const Real e = std::exp(z);
  return e / (Real(1) + e);
}

}  // namespace

template <class Real>
Var Graph<Real>::push(T value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <class Real>
typename Graph<Real>::T& Graph<Real>::g(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.data.empty()) n.grad = T(n.value.shape);
  return n.grad;
}

template <class Real>
void Graph<Real>::check_finite(const T& t, const char* op) const {
  for (Real v : t.data)
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value");
}

template <class Real>
bool Graph<Real>::any_grad(std::initializer_list<Var> vs) const {
  for (Var v : vs)
    if (v.valid() && nodes_.at(v.id).needs_grad) return true;
  return false;
}

template <class Real>
Real Graph<Real>::scalar(Var v) const {
  const T& t = value(v);
  if (t.size() != 1) throw InvalidArgument("scalar(): tensor has " + std::to_string(t.size()) + " elements");
  return t.data[0];
}

template <class Real>
Var Graph<Real>::input(T value) {
  check_finite(value, "input");
  return push(std::move(value), false);
}

template <class Real>
Var Graph<Real>::param(Param<Real>& p) {
  Var v = push(p.value, true);
  Node& n = node(v);
  n.param = &p;
  n.back = [this, v, &p] {
    const T& gr = nodes_[v.id].grad;
    if (p.grad.data.empty()) p.grad = T(p.value.shape);
    for (std::size_t i = 0; i < gr.size(); ++i) p.grad.data[i] += gr.data[i];
    p.has_grad = true;
  };
  return v;
}

template <class Real>
Var Graph<Real>::detach(Var x) {
  return push(value(x), false);
}

template <class Real>
Var Graph<Real>::conv2d(Var x, Var w, Var b, int stride) {
  const T& X = value(x);
  const T& W = value(w);
  require(X.rank() == 4 && W.rank() == 4, "conv2d: expects 4-D input and weight");
  require(W.dim(1) == X.dim(1), "conv2d: channel mismatch " + shape_str(X.shape) + " vs " + shape_str(W.shape));
  require(W.dim(2) == W.dim(3) && W.dim(2) % 2 == 1, "conv2d: kernel must be square and odd");
  require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");
  if (b.valid()) require(value(b).size() == static_cast<std::size_t>(W.dim(0)), "conv2d: bias size");
  ConvGeom gm{X.dim(0), X.dim(1), X.dim(2), X.dim(3), W.dim(0), W.dim(2), stride, W.dim(2) / 2, 0, 0};
  gm.ho = (gm.h + 2 * gm.p - gm.k) / gm.s + 1;
  gm.wo = (gm.w + 2 * gm.p - gm.k) / gm.s + 1;
  T out({gm.n, gm.co, gm.ho, gm.wo});
  const std::size_t xin = static_cast<std::size_t>(gm.ci) * gm.h * gm.w;
  const std::size_t oin = static_cast<std::size_t>(gm.co) * gm.hw();
  const Real* bias = b.valid() ? value(b).data.data() : nullptr;
  const bool par = exec_ == Exec::parallel;
  const bool direct = gm.s == 1 && gm.co <= 4;

#pragma omp parallel for schedule(static) if (par)
  for (int n = 0; n < gm.n; ++n) {
    if (direct) {
      direct_fwd(X.data.data() + n * xin, W.data.data(), gm, out.data.data() + n * oin);
      if (bias)
        for (int c = 0; c < gm.co; ++c)
          for (int i = 0; i < gm.hw(); ++i) out.data[n * oin + c * gm.hw() + i] += bias[c];
      continue;
    }
    std::vector<Real> col(static_cast<std::size_t>(gm.kdim()) * gm.hw());
    im2col(X.data.data() + n * xin, gm, col.data());
    MatMap<Real> o(out.data.data() + n * oin, gm.co, gm.hw());
    o.noalias() = CMatMap<Real>(W.data.data(), gm.co, gm.kdim()) *
                  CMatMap<Real>(col.data(), gm.kdim(), gm.hw());
    if (bias)
      for (int c = 0; c < gm.co; ++c) o.row(c).array() += bias[c];
  }
  check_finite(out, "conv2d");

  Var y = push(std::move(out), any_grad({x, w, b}));
  if (!node(y).needs_grad) return y;
  node(y).back = [this, x, w, b, y, gm, xin, oin, par, direct] {
    const T& X = value(x);
    const T& W = value(w);
    const T& G = nodes_[y.id].grad;
    const bool gx = nodes_[x.id].needs_grad, gw = nodes_[w.id].needs_grad;
    const bool gb = b.valid() && nodes_[b.id].needs_grad;
    Real* dx = gx ? g(x).data.data() : nullptr;
    const std::size_t wsz = static_cast<std::size_t>(gm.co) * gm.kdim();
    std::vector<Real> dw_img(gw ? wsz * gm.n : 0);
    std::vector<double> db_img(gb ? static_cast<std::size_t>(gm.co) * gm.n : 0);

#pragma omp parallel for schedule(static) if (par)
    for (int n = 0; n < gm.n; ++n) {
      CMatMap<Real> go(G.data.data() + n * oin, gm.co, gm.hw());
      std::vector<Real> col(direct ? 0 : static_cast<std::size_t>(gm.kdim()) * gm.hw());
      if (direct) {
        direct_bwd(X.data.data() + n * xin, W.data.data(), G.data.data() + n * oin, gm,
                   gw ? dw_img.data() + n * wsz : nullptr, gx ? dx + n * xin : nullptr);
      } else if (gw) {
        im2col(X.data.data() + n * xin, gm, col.data());
        MatMap<Real>(dw_img.data() + n * wsz, gm.co, gm.kdim()).noalias() =
            go * CMatMap<Real>(col.data(), gm.kdim(), gm.hw()).transpose();
      }
      if (gx && !direct) {
        MatMap<Real>(col.data(), gm.kdim(), gm.hw()).noalias() =
            CMatMap<Real>(W.data.data(), gm.co, gm.kdim()).transpose() * go;
        col2im_add(col.data(), gm, dx + n * xin);
      }
      if (gb)
        for (int c = 0; c < gm.co; ++c) {
          double s = 0;
          for (int i = 0; i < gm.hw(); ++i) s += go(c, i);
          db_img[static_cast<std::size_t>(n) * gm.co + c] = s;
        }
    }
    // Batch reductions in a fixed order, independent of the thread count.
    if (gw) {
      T& dw = g(w);
      for (std::size_t i = 0; i < wsz; ++i) {
        double s = 0;
        for (int n = 0; n < gm.n; ++n) s += dw_img[n * wsz + i];
        dw.data[i] += static_cast<Real>(s);
      }
    }
    if (gb) {
      T& db = g(b);
      for (int c = 0; c < gm.co; ++c) {
        double s = 0;
        for (int n = 0; n < gm.n; ++n) s += db_img[static_cast<std::size_t>(n) * gm.co + c];
        db.data[c] += static_cast<Real>(s);
      }
    }
  };
  return y;
}

template <class Real>
Var Graph<Real>::upsample_nearest(Var x, int f) {
  const T& X = value(x);
  require(X.rank() == 4, "upsample_nearest: expects 4-D input");
  require(f >= 1, "upsample_nearest: factor must be >= 1");
  const int N = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
  T out({N, C, H * f, W * f});
  for (int nc = 0; nc < N * C; ++nc)
    for (int y = 0; y < H * f; ++y)
      for (int xx = 0; xx < W * f; ++xx)
        out.data[(static_cast<std::size_t>(nc) * H * f + y) * W * f + xx] =
            X.data[(static_cast<std::size_t>(nc) * H + y / f) * W + xx / f];
  Var y = push(std::move(out), any_grad({x}));
  if (node(y).needs_grad)
    node(y).back = [this, x, y, N, C, H, W, f] {
      const T& G = nodes_[y.id].grad;
      T& dx = g(x);
      for (int nc = 0; nc < N * C; ++nc)
        for (int yy = 0; yy < H; ++yy)
          for (int xx = 0; xx < W; ++xx) {
            double s = 0;
            for (int a = 0; a < f; ++a)
              for (int b = 0; b < f; ++b)
                s += G.data[(static_cast<std::size_t>(nc) * H * f + yy * f + a) * W * f + xx * f + b];
            dx.data[(static_cast<std::size_t>(nc) * H + yy) * W + xx] += static_cast<Real>(s);
          }
    };
  return y;
}

#define STE_UNARY(NAME, FWD, DERIV)                                            \
  template <class Real>                                                        \
  Var Graph<Real>::NAME(Var x) {                                               \
    const T& X = value(x);                                                     \
    T out(X.shape);                                                            \
    for (std::size_t i = 0; i < X.size(); ++i) {                               \
      const Real v = X.data[i];                                                \
      out.data[i] = FWD;                                                       \
    }                                                                          \
    check_finite(out, #NAME);                                                  \
    Var y = push(std::move(out), any_grad({x}));                               \
    if (node(y).needs_grad)                                                    \
      node(y).back = [this, x, y] {                                            \
        const T& X = value(x);                                                 \
        const T& Y = value(y);                                                 \
        const T& G = nodes_[y.id].grad;                                        \
        T& dx = g(x);                                                          \
        for (std::size_t i = 0; i < X.size(); ++i) {                           \
          const Real v = X.data[i];                                            \
          const Real o = Y.data[i];                                            \
          (void)v;                                                             \
          (void)o;                                                             \
          dx.data[i] += G.data[i] * (DERIV);                                   \
        }                                                                      \
      };                                                                       \
    return y;                                                                  \
  }

// The kink at 0 takes the negative-side slope.
STE_UNARY(relu, v > 0 ? v : Real(0), v > 0 ? Real(1) : Real(0))
STE_UNARY(sigmoid, sigmoid_of(v), o * (Real(1) - o))
STE_UNARY(tanh, std::tanh(v), Real(1) - o * o)
#undef STE_UNARY

template <class Real>
Var Graph<Real>::leaky_relu(Var x, double slope) {
  const T& X = value(x);
  const Real a = static_cast<Real>(slope);
  T out(X.shape);
  for (std::size_t i = 0; i < X.size(); ++i) out.data[i] = X.data[i] > 0 ? X.data[i] : a * X.data[i];
  Var y = push(std::move(out), any_grad({x}));
  if (node(y).needs_grad)
    node(y).back = [this, x, y, a] {
      const T& X = value(x);
      const T& G = nodes_[y.id].grad;
      T& dx = g(x);
      for (std::size_t i = 0; i < X.size(); ++i) dx.data[i] += G.data[i] * (X.data[i] > 0 ? Real(1) : a);
    };
  return y;
}

template <class Real>
Var Graph<Real>::add(Var a, Var b) {
  require(value(a).shape == value(b).shape, "add: shape mismatch");
  T out = value(a);
  const T& B = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
  check_finite(out, "add");
  Var y = push(std::move(out), any_grad({a, b}));
  if (node(y).needs_grad)
    node(y).back = [this, a, b, y] {
      const T& G = nodes_[y.id].grad;
      for (Var v : {a, b})
        if (nodes_[v.id].needs_grad) {
          T& d = g(v);
          for (std::size_t i = 0; i < G.size(); ++i) d.data[i] += G.data[i];
        }
    };
  return y;
}

template <class Real>
Var Graph<Real>::sub(Var a, Var b) {
  require(value(a).shape == value(b).shape, "sub: shape mismatch");
  T out = value(a);
  const T& B = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= B.data[i];
  check_finite(out, "sub");
  Var y = push(std::move(out), any_grad({a, b}));
  if (node(y).needs_grad)
    node(y).back = [this, a, b, y] {
      const T& G = nodes_[y.id].grad;
      if (nodes_[a.id].needs_grad) {
        T& d = g(a);
        for (std::size_t i = 0; i < G.size(); ++i) d.data[i] += G.data[i];
      }
      if (nodes_[b.id].needs_grad) {
        T& d = g(b);
        for (std::size_t i = 0; i < G.size(); ++i) d.data[i] -= G.data[i];
      }
    };
  return y;
}

template <class Real>
Var Graph<Real>::mul(Var a, Var b) {
  require(value(a).shape == value(b).shape, "mul: shape mismatch " + shape_str(value(a).shape) +
                                                " vs " + shape_str(value(b).shape));
  T out = value(a);
  const T& B = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
  check_finite(out, "mul");
  Var y = push(std::move(out), any_grad({a, b}));
  if (node(y).needs_grad)
    node(y).back = [this, a, b, y] {
      const T& G = nodes_[y.id].grad;
      const T& A = value(a);
      const T& B = value(b);
      if (nodes_[a.id].needs_grad) {
        T& d = g(a);
        for (std::size_t i = 0; i < G.size(); ++i) d.data[i] += G.data[i] * B.data[i];
      }
      if (nodes_[b.id].needs_grad) {
        T& d = g(b);
        for (std::size_t i = 0; i < G.size(); ++i) d.data[i] += G.data[i] * A.data[i];
      }
    };
  return y;
}

template <class Real>
Var Graph<Real>::div(Var a, Var b) {
  require(value(a).shape == value(b).shape, "div: shape mismatch");
  T out = value(a);
  const T& B = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] /= B.data[i];
  check_finite(out, "div");
  Var y = push(std::move(out), any_grad({a, b}));
  if (node(y).needs_grad)
    node(y).back = [this, a, b, y] {
      const T& G = nodes_[y.id].grad;
      const T& A = value(a);
      const T& B = value(b);
      if (nodes_[a.id].needs_grad) {
        T& d = g(a);
        for (std::size_t i = 0; i < G.size(); ++i) d.data[i] += G.data[i] / B.data[i];
      }
      if (nodes_[b.id].needs_grad) {
        T& d = g(b);
        for (std::size_t i = 0; i < G.size(); ++i)
          d.data[i] -= G.data[i] * A.data[i] / (B.data[i] * B.data[i]);
      }
    };
  return y;
}

template <class Real>
Var Graph<Real>::affine(Var x, double scale, double shift) {
  T out = value(x);
  for (auto& v : out.data) v = static_cast<Real>(scale * v + shift);
  check_finite(out, "affine");
  Var y = push(std::move(out), any_grad({x}));
  if (node(y).needs_grad)
    node(y).back = [this, x, y, scale] {
      const T& G = nodes_[y.id].grad;
      T& d = g(x);
      for (std::size_t i = 0; i < G.size(); ++i) d.data[i] += static_cast<Real>(scale * G.data[i]);
    };
  return y;
}

template <class Real>
Var Graph<Real>::pow(Var x, double p) {
  T out = value(x);
  for (auto& v : out.data) v = static_cast<Real>(std::pow(static_cast<double>(v), p));
  check_finite(out, "pow");
  Var y = push(std::move(out), any_grad({x}));
  if (node(y).needs_grad)
    node(y).back = [this, x, y, p] {
      const T& G = nodes_[y.id].grad;
      const T& X = value(x);
      T& d = g(x);
      for (std::size_t i = 0; i < G.size(); ++i) {
        const double v = X.data[i];
        const double dv = (v == 0.0 && p < 1.0) ? 0.0 : p * std::pow(v, p - 1.0);
        d.data[i] += static_cast<Real>(G.data[i] * dv);
      }
    };
  return y;
}

template <class Real>
Var Graph<Real>::concat(Var a, Var b) {
  const T& A = value(a);
  const T& B = value(b);
  require(A.rank() >= 2 && A.rank() == B.rank() && A.dim(0) == B.dim(0), "concat: rank/batch mismatch");
  for (int i = 2; i < A.rank(); ++i) require(A.dim(i) == B.dim(i), "concat: trailing dims differ");
  const std::size_t inner = numel(Shape(A.shape.begin() + 2, A.shape.end()));
  const std::size_t ca = A.dim(1) * inner, cb = B.dim(1) * inner;
  Shape s = A.shape;
  s[1] += B.dim(1);
  T out(s);
  for (int n = 0; n < A.dim(0); ++n) {
    std::copy_n(A.data.begin() + n * ca, ca, out.data.begin() + n * (ca + cb));
    std::copy_n(B.data.begin() + n * cb, cb, out.data.begin() + n * (ca + cb) + ca);
  }
  Var y = push(std::move(out), any_grad({a, b}));
  if (node(y).needs_grad)
    node(y).back = [this, a, b, y, ca, cb] {
      const T& G = nodes_[y.id].grad;
      const int N = value(a).dim(0);
      if (nodes_[a.id].needs_grad) {
        T& d = g(a);
        for (int n = 0; n < N; ++n)
          for (std::size_t i = 0; i < ca; ++i) d.data[n * ca + i] += G.data[n * (ca + cb) + i];
      }
      if (nodes_[b.id].needs_grad) {
        T& d = g(b);
        for (int n = 0; n < N; ++n)
          for (std::size_t i = 0; i < cb; ++i) d.data[n * cb + i] += G.data[n * (ca + cb) + ca + i];
      }
    };
  return y;
}

template <class Real>
Var Graph<Real>::sum(Var x) {
  double s = 0;
  for (Real v : value(x).data) s += v;
  T out({1}, static_cast<Real>(s));
  check_finite(out, "sum");
  Var y = push(std::move(out), any_grad({x}));
  if (node(y).needs_grad)
    node(y).back = [this, x, y] {
      const Real gv = nodes_[y.id].grad.data[0];
      for (auto& d : g(x).data) d += gv;
    };
  return y;
}

template <class Real>
Var Graph<Real>::mean(Var x) {
  const std::size_t n = value(x).size();
  require(n > 0, "mean: empty tensor");
  double s = 0;
  for (Real v : value(x).data) s += v;
  T out({1}, static_cast<Real>(s / n));
  check_finite(out, "mean");
  Var y = push(std::move(out), any_grad({x}));
  if (node(y).needs_grad)
    node(y).back = [this, x, y, n] {
      const Real gv = static_cast<Real>(nodes_[y.id].grad.data[0] / static_cast<double>(n));
      for (auto& d : g(x).data) d += gv;
    };
  return y;
}

template <class Real>
Var Graph<Real>::l1(Var a, Var b) {
  const T& A = value(a);
  const T& B = value(b);
  require(A.shape == B.shape, "l1: shape mismatch " + shape_str(A.shape) + " vs " + shape_str(B.shape));
  require(A.size() > 0, "l1: empty tensor");
  double s = 0;
  for (std::size_t i = 0; i < A.size(); ++i) s += std::abs(static_cast<double>(A.data[i]) - B.data[i]);
  T out({1}, static_cast<Real>(s / A.size()));
  check_finite(out, "l1");
  Var y = push(std::move(out), any_grad({a, b}));
  if (node(y).needs_grad)
    node(y).back = [this, a, b, y] {
      const T& A = value(a);
      const T& B = value(b);
      const double gv = nodes_[y.id].grad.data[0] / static_cast<double>(A.size());
      const bool ga = nodes_[a.id].needs_grad, gb = nodes_[b.id].needs_grad;
      T* da = ga ? &g(a) : nullptr;
      T* db = gb ? &g(b) : nullptr;
      for (std::size_t i = 0; i < A.size(); ++i) {
        const double d = static_cast<double>(A.data[i]) - B.data[i];
        const Real sgn = static_cast<Real>(d > 0 ? gv : d < 0 ? -gv : 0.0);
        if (da) da->data[i] += sgn;
        if (db) db->data[i] -= sgn;
      }
    };
  return y;
}

template <class Real>
Var Graph<Real>::matmul(Var a, Var b) {
  const T& A = value(a);
  const T& B = value(b);
  require(A.rank() == 2 && B.rank() == 2 && A.dim(1) == B.dim(0),
          "matmul: shapes " + shape_str(A.shape) + " x " + shape_str(B.shape));
  const int M = A.dim(0), K = A.dim(1), N = B.dim(1);
  T out({M, N});
  MatMap<Real>(out.data.data(), M, N).noalias() =
      CMatMap<Real>(A.data.data(), M, K) * CMatMap<Real>(B.data.data(), K, N);
  check_finite(out, "matmul");
  Var y = push(std::move(out), any_grad({a, b}));
  if (node(y).needs_grad)
    node(y).back = [this, a, b, y, M, K, N] {
      CMatMap<Real> G(nodes_[y.id].grad.data.data(), M, N);
      if (nodes_[a.id].needs_grad)
        MatMap<Real>(g(a).data.data(), M, K).noalias() +=
            G * CMatMap<Real>(value(b).data.data(), K, N).transpose();
      if (nodes_[b.id].needs_grad)
        MatMap<Real>(g(b).data.data(), K, N).noalias() +=
            CMatMap<Real>(value(a).data.data(), M, K).transpose() * G;
    };
  return y;
}

template <class Real>
Var Graph<Real>::add_rowvec(Var a, Var b) {
  const T& A = value(a);
  const T& B = value(b);
  require(A.rank() == 2 && B.size() == static_cast<std::size_t>(A.dim(1)), "add_rowvec: shape mismatch");
  const int M = A.dim(0), N = A.dim(1);
  T out = A;
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) out.data[m * N + n] += B.data[n];
  check_finite(out, "add_rowvec");
  Var y = push(std::move(out), any_grad({a, b}));
  if (node(y).needs_grad)
    node(y).back = [this, a, b, y, M, N] {
      const T& G = nodes_[y.id].grad;
      if (nodes_[a.id].needs_grad) {
        T& d = g(a);
        for (std::size_t i = 0; i < G.size(); ++i) d.data[i] += G.data[i];
      }
      if (nodes_[b.id].needs_grad) {
        T& d = g(b);
        for (int n = 0; n < N; ++n) {
          double s = 0;
          for (int m = 0; m < M; ++m) s += G.data[m * N + n];
          d.data[n] += static_cast<Real>(s);
        }
      }
    };
  return y;
}

template <class Real>
Var Graph<Real>::slice_cols(Var a, int begin, int end) {
  const T& A = value(a);
  require(A.rank() == 2 && 0 <= begin && begin < end && end <= A.dim(1), "slice_cols: bad range");
  const int M = A.dim(0), N = A.dim(1), W = end - begin;
  T out({M, W});
  for (int m = 0; m < M; ++m)
    for (int j = 0; j < W; ++j) out.data[m * W + j] = A.data[m * N + begin + j];
  Var y = push(std::move(out), any_grad({a}));
  if (node(y).needs_grad)
    node(y).back = [this, a, y, M, N, W, begin] {
      const T& G = nodes_[y.id].grad;
      T& d = g(a);
      for (int m = 0; m < M; ++m)
        for (int j = 0; j < W; ++j) d.data[m * N + begin + j] += G.data[m * W + j];
    };
  return y;
}

template <class Real>
Var Graph<Real>::log_softmax(Var a) {
  const T& A = value(a);
  require(A.rank() == 2, "log_softmax: expects [M,N]");
  const int M = A.dim(0), N = A.dim(1);
  T out(A.shape);
  for (int m = 0; m < M; ++m) {
    double mx = A.data[m * N];
    for (int n = 1; n < N; ++n) mx = std::max(mx, static_cast<double>(A.data[m * N + n]));
    double s = 0;
    for (int n = 0; n < N; ++n) s += std::exp(A.data[m * N + n] - mx);
    const double lse = mx + std::log(s);
    for (int n = 0; n < N; ++n) out.data[m * N + n] = static_cast<Real>(A.data[m * N + n] - lse);
  }
  check_finite(out, "log_softmax");
  Var y = push(std::move(out), any_grad({a}));
  if (node(y).needs_grad)
    node(y).back = [this, a, y, M, N] {
      const T& G = nodes_[y.id].grad;
      const T& Y = value(y);
      T& d = g(a);
      for (int m = 0; m < M; ++m) {
        double gs = 0;
        for (int n = 0; n < N; ++n) gs += G.data[m * N + n];
        for (int n = 0; n < N; ++n)
          d.data[m * N + n] += static_cast<Real>(G.data[m * N + n] - std::exp(static_cast<double>(Y.data[m * N + n])) * gs);
      }
    };
  return y;
}

template <class Real>
Var Graph<Real>::pick(Var a, const std::vector<int>& idx) {
  const T& A = value(a);
  require(A.rank() == 2 && idx.size() == static_cast<std::size_t>(A.dim(0)), "pick: index count");
  const int M = A.dim(0), N = A.dim(1);
  T out({M});
  for (int m = 0; m < M; ++m) {
    require(idx[m] >= 0 && idx[m] < N, "pick: index out of range");
    out.data[m] = A.data[m * N + idx[m]];
  }
  Var y = push(std::move(out), any_grad({a}));
  if (node(y).needs_grad)
    node(y).back = [this, a, y, idx, M, N] {
      const T& G = nodes_[y.id].grad;
      T& d = g(a);
      for (int m = 0; m < M; ++m) d.data[m * N + idx[m]] += G.data[m];
    };
  return y;
}

template <class Real>
Var Graph<Real>::embedding(Var table, const std::vector<int>& idx) {
  const T& E = value(table);
  require(E.rank() == 2, "embedding: table must be [V,D]");
  const int V = E.dim(0), D = E.dim(1), M = static_cast<int>(idx.size());
  T out({M, D});
  for (int m = 0; m < M; ++m) {
    require(idx[m] >= 0 && idx[m] < V, "embedding: index out of range");
    std::copy_n(E.data.begin() + static_cast<std::size_t>(idx[m]) * D, D, out.data.begin() + m * D);
  }
  Var y = push(std::move(out), any_grad({table}));
  if (node(y).needs_grad)
    node(y).back = [this, table, y, idx, D] {
      const T& G = nodes_[y.id].grad;
      T& d = g(table);
      for (std::size_t m = 0; m < idx.size(); ++m)
        for (int j = 0; j < D; ++j) d.data[static_cast<std::size_t>(idx[m]) * D + j] += G.data[m * D + j];
    };
  return y;
}

template <class Real>
Var Graph<Real>::lstm_cell(Var x, Var h, Var c, Var wx, Var wh, Var b) {
  const T& X = value(x);
  const T& Hs = value(h);
  const T& Cs = value(c);
  const T& Wx = value(wx);
  const T& Wh = value(wh);
  const T& Bv = value(b);
  require(X.rank() == 2 && Hs.rank() == 2 && Cs.shape == Hs.shape, "lstm_cell: state shapes");
  const int B = X.dim(0), I = X.dim(1), H = Hs.dim(1);
  require(Hs.dim(0) == B, "lstm_cell: batch mismatch");
  require(Wx.shape == Shape{I, 4 * H} && Wh.shape == Shape{H, 4 * H} && Bv.size() == 4u * H,
          "lstm_cell: weight shapes");
  std::vector<Real> z(static_cast<std::size_t>(B) * 4 * H);
  MatMap<Real> Z(z.data(), B, 4 * H);
  Z.noalias() = CMatMap<Real>(X.data.data(), B, I) * CMatMap<Real>(Wx.data.data(), I, 4 * H);
  Z.noalias() += CMatMap<Real>(Hs.data.data(), B, H) * CMatMap<Real>(Wh.data.data(), H, 4 * H);
  // gates: i, f, g, o activations, then c'
  std::vector<Real> act(z.size()), cn(static_cast<std::size_t>(B) * H);
  T out({B, 2 * H});
  for (int r = 0; r < B; ++r)
    for (int j = 0; j < H; ++j) {
      const std::size_t base = static_cast<std::size_t>(r) * 4 * H;
      const Real i = sigmoid_of(z[base + j] + Bv.data[j]);
      const Real f = sigmoid_of(z[base + H + j] + Bv.data[H + j]);
      const Real gg = std::tanh(z[base + 2 * H + j] + Bv.data[2 * H + j]);
      const Real o = sigmoid_of(z[base + 3 * H + j] + Bv.data[3 * H + j]);
      act[base + j] = i;
      act[base + H + j] = f;
      act[base + 2 * H + j] = gg;
      act[base + 3 * H + j] = o;
      const Real cc = f * Cs.data[r * H + j] + i * gg;
      cn[r * H + j] = cc;
      out.data[r * 2 * H + j] = o * std::tanh(cc);
      out.data[r * 2 * H + H + j] = cc;
    }
  check_finite(out, "lstm_cell");
  Var y = push(std::move(out), any_grad({x, h, c, wx, wh, b}));
  if (node(y).needs_grad)
    node(y).back = [this, x, h, c, wx, wh, b, y, B, I, H, act = std::move(act), cn = std::move(cn)] {
      const T& G = nodes_[y.id].grad;
      const T& Cs = value(c);
      std::vector<Real> dz(static_cast<std::size_t>(B) * 4 * H);
      std::vector<Real> dc(static_cast<std::size_t>(B) * H);
      for (int r = 0; r < B; ++r)
        for (int j = 0; j < H; ++j) {
          const std::size_t base = static_cast<std::size_t>(r) * 4 * H;
          const Real i = act[base + j], f = act[base + H + j], gg = act[base + 2 * H + j],
                     o = act[base + 3 * H + j];
          const Real tc = std::tanh(cn[r * H + j]);
          const Real dh = G.data[r * 2 * H + j];
          const Real dct = G.data[r * 2 * H + H + j] + dh * o * (Real(1) - tc * tc);
          dz[base + j] = dct * gg * i * (Real(1) - i);
          dz[base + H + j] = dct * Cs.data[r * H + j] * f * (Real(1) - f);
          dz[base + 2 * H + j] = dct * i * (Real(1) - gg * gg);
          dz[base + 3 * H + j] = dh * tc * o * (Real(1) - o);
          dc[r * H + j] = dct * f;
        }
      CMatMap<Real> DZ(dz.data(), B, 4 * H);
      if (nodes_[x.id].needs_grad)
        MatMap<Real>(g(x).data.data(), B, I).noalias() +=
            DZ * CMatMap<Real>(value(wx).data.data(), I, 4 * H).transpose();
      if (nodes_[h.id].needs_grad)
        MatMap<Real>(g(h).data.data(), B, H).noalias() +=
            DZ * CMatMap<Real>(value(wh).data.data(), H, 4 * H).transpose();
      if (nodes_[c.id].needs_grad) {
        T& d = g(c);
        for (std::size_t k = 0; k < dc.size(); ++k) d.data[k] += dc[k];
      }
      if (nodes_[wx.id].needs_grad)
        MatMap<Real>(g(wx).data.data(), I, 4 * H).noalias() +=
            CMatMap<Real>(value(x).data.data(), B, I).transpose() * DZ;
      if (nodes_[wh.id].needs_grad)
        MatMap<Real>(g(wh).data.data(), H, 4 * H).noalias() +=
            CMatMap<Real>(value(h).data.data(), B, H).transpose() * DZ;
      if (nodes_[b.id].needs_grad) {
        T& d = g(b);
        for (int k = 0; k < 4 * H; ++k) {
          double s = 0;
          for (int r = 0; r < B; ++r) s += dz[static_cast<std::size_t>(r) * 4 * H + k];
          d.data[k] += static_cast<Real>(s);
        }
      }
    };
  return y;
}

template <class Real>
void Graph<Real>::backward(Var loss) {
  if (value(loss).size() != 1) throw InvalidArgument("backward: loss must be a scalar");
  if (!node(loss).needs_grad) return;
  g(loss).data[0] = Real(1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && !n.grad.data.empty()) n.back();
  }
}

template <class Real>
void Graph<Real>::clear_grads() {
  for (auto& n : nodes_) n.grad = T();
}

template class Graph<float>;
template class Graph<double>;

}  // namespace ste::nn
