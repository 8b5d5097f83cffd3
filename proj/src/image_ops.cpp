#include "ste/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ste {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Point2 apply_homography(const Mat3& h, Point2 p) {
  const double w = h[6] * p.x + h[7] * p.y + h[8];
  return {(h[0] * p.x + h[1] * p.y + h[2]) / w, (h[3] * p.x + h[4] * p.y + h[5]) / w};
}

Mat3 invert3(const Mat3& m) {
  const double c00 = m[4] * m[8] - m[5] * m[7];
  const double c01 = m[5] * m[6] - m[3] * m[8];
  const double c02 = m[3] * m[7] - m[4] * m[6];
  const double det = m[0] * c00 + m[1] * c01 + m[2] * c02;
  if (std::abs(det) < 1e-14) throw InvalidArgument("invert3: singular matrix");
  Mat3 r{c00,
         m[2] * m[7] - m[1] * m[8],
         m[1] * m[5] - m[2] * m[4],
         c01,
         m[0] * m[8] - m[2] * m[6],
         m[2] * m[3] - m[0] * m[5],
         c02,
         m[1] * m[6] - m[0] * m[7],
         m[0] * m[4] - m[1] * m[3]};
  for (auto& v : r) v /= det;
  return r;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + r];
  }
  for (auto& v : k) v /= sum;
  return k;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

namespace {

void blur_rows(const RasterImage& in, std::vector<double>& out, const std::vector<double>& k,
               Exec exec) {
  const int h = in.height(), w = in.width(), ch = in.channels();
  const int r = static_cast<int>(k.size() / 2);
  auto row = [&](int y) {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * in.at(y, reflect_index(x + i, w), c);
        out[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
      }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) row(y);
  } else {
    for (int y = 0; y < h; ++y) row(y);
  }
}

void blur_cols(const std::vector<double>& in, RasterImage& out, const std::vector<double>& k,
               Exec exec) {
  const int h = out.height(), w = out.width(), ch = out.channels();
  const int r = static_cast<int>(k.size() / 2);
  auto row = [&](int y) {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i)
          acc += k[i + r] * in[(static_cast<std::size_t>(reflect_index(y + i, h)) * w + x) * ch + c];
        out.at(y, x, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) row(y);
  } else {
    for (int y = 0; y < h; ++y) row(y);
  }
}

}  // namespace

RasterImage gaussian_blur(const RasterImage& img, double sigma, Exec exec) {
  if (!(sigma >= 0.0)) throw InvalidArgument("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0 || img.empty()) return img;
  const auto k = gaussian_kernel(sigma);
  std::vector<double> tmp(img.size());
  blur_rows(img, tmp, k, exec);
  RasterImage out(img.height(), img.width(), img.channels());
  blur_cols(tmp, out, k, exec);
  return out;
}

RasterImage alpha_blend(const RasterImage& fg, const RasterImage& bg, const BinaryMask& mask,
                        double a) {
  if (!fg.same_shape(bg) || !mask.same_shape(bg))
    throw InvalidArgument("alpha_blend: shape mismatch");
  if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("alpha_blend: a must be in [0,1]");
  RasterImage out = bg;
  const int ch = bg.channels();
  const float af = static_cast<float>(a);
  for (int y = 0; y < bg.height(); ++y)
    for (int x = 0; x < bg.width(); ++x) {
      if (!mask.at(y, x)) continue;
      for (int c = 0; c < ch; ++c) {
        // a == 0 and a == 1 must reproduce fg / bg exactly.
        const float v = (1.0f - af) * fg.at(y, x, c) + af * bg.at(y, x, c);
        out.at(y, x, c) = std::clamp(v, 0.0f, 1.0f);
      }
    }
  return out;
}

namespace {

struct PoissonSystem {
  int h = 0, w = 0;
  std::vector<int> red, black;  // flat indices of unknowns by checkerboard color
  std::vector<std::uint8_t> in_mask;
};

PoissonSystem build_system(const BinaryMask& mask) {
  PoissonSystem s;
  s.h = mask.height();
  s.w = mask.width();
  s.in_mask.assign(mask.data().begin(), mask.data().end());
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x) {
      if (!mask.at(y, x)) continue;
      if (x == 0 || y == 0 || x == s.w - 1 || y == s.h - 1)
        throw InvalidArgument("poisson_blend: mask must lie strictly inside the image");
      ((x + y) % 2 == 0 ? s.red : s.black).push_back(y * s.w + x);
    }
  return s;
}

// Guidance term sum_q (src_p - src_q) for one channel.
std::vector<double> guidance(const RasterImage& src, const PoissonSystem& s, int c) {
  std::vector<double> b(static_cast<std::size_t>(s.h) * s.w, 0.0);
  auto g = [&](int y, int x) { return static_cast<double>(src.at(y, x, c)); };
  for (const auto* list : {&s.red, &s.black})
    for (int idx : *list) {
      const int y = idx / s.w, x = idx % s.w;
      b[idx] = 4.0 * g(y, x) - g(y - 1, x) - g(y + 1, x) - g(y, x - 1) - g(y, x + 1);
    }
  return b;
}

double residual_of(const std::vector<double>& f, const std::vector<double>& b,
                   const PoissonSystem& s, Exec exec) {
  const int w = s.w;
  double r = 0.0;
  auto eval = [&](int idx) {
    return std::abs(b[idx] - (4.0 * f[idx] - f[idx - 1] - f[idx + 1] - f[idx - w] - f[idx + w]));
  };
  for (const auto* list : {&s.red, &s.black}) {
    const int n = static_cast<int>(list->size());
    const int* ids = list->data();
    if (exec == Exec::parallel) {
#pragma omp parallel for reduction(max : r) schedule(static)
      for (int i = 0; i < n; ++i) r = std::max(r, eval(ids[i]));
    } else {
      for (int i = 0; i < n; ++i) r = std::max(r, eval(ids[i]));
    }
  }
  return r;
}

// One half-sweep over a single color. Same-color unknowns never neighbour
// each other, so the parallel loop computes exactly what the serial one does.
void sor_color(std::vector<double>& f, const std::vector<double>& b, const std::vector<int>& ids,
               int w, double omega, Exec exec) {
  const int n = static_cast<int>(ids.size());
  const int* p = ids.data();
  double* fp = f.data();
  const double* bp = b.data();
  auto upd = [&](int i) {
    const int idx = p[i];
    const double gs = 0.25 * (bp[idx] + fp[idx - 1] + fp[idx + 1] + fp[idx - w] + fp[idx + w]);
    fp[idx] += omega * (gs - fp[idx]);
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) upd(i);
  } else {
    for (int i = 0; i < n; ++i) upd(i);
  }
}

}  // namespace

PoissonResult poisson_blend(const RasterImage& src, const RasterImage& dst, const BinaryMask& mask,
                            const PoissonOptions& opts) {
  if (!src.same_shape(dst) || !mask.same_shape(dst))
    throw InvalidArgument("poisson_blend: shape mismatch");
  PoissonResult res{dst, 0.0, 0};
  const PoissonSystem sys = build_system(mask);
  const std::size_t unknowns = sys.red.size() + sys.black.size();
  if (unknowns == 0) return res;

  const int max_iters = opts.max_iters > 0 ? opts.max_iters : static_cast<int>(10 * unknowns);
  const Rect box = mask.bounds();
  const double rho =
      0.5 * (std::cos(std::numbers::pi / (box.width() + 1)) +
             std::cos(std::numbers::pi / (box.height() + 1)));
  const double omega = 2.0 / (1.0 + std::sqrt(std::max(0.0, 1.0 - rho * rho)));

  const int h = dst.height(), w = dst.width();
  for (int c = 0; c < dst.channels(); ++c) {
    std::vector<double> f(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) f[y * w + x] = dst.at(y, x, c);
    const auto b = guidance(src, sys, c);

    double r = residual_of(f, b, sys, opts.exec);
    int it = 0;
    while (r > opts.tol && it < max_iters) {
      sor_color(f, b, sys.red, w, omega, opts.exec);
      sor_color(f, b, sys.black, w, omega, opts.exec);
      ++it;
      r = residual_of(f, b, sys, opts.exec);
    }
    if (r > opts.tol)
      throw ConvergenceError("poisson_blend: no convergence after " + std::to_string(it) +
                                 " iterations, residual " + std::to_string(r),
                             r);
    res.residual = std::max(res.residual, r);
    res.iterations = std::max(res.iterations, it);
    for (const auto* list : {&sys.red, &sys.black})
      for (int idx : *list)
        res.image.at(idx / w, idx % w, c) = static_cast<float>(std::clamp(f[idx], 0.0, 1.0));
  }
  return res;
}

double poisson_residual(const RasterImage& src, const RasterImage& dst, const BinaryMask& mask,
                        const RasterImage& candidate) {
  if (!src.same_shape(dst) || !mask.same_shape(dst) || !candidate.same_shape(dst))
    throw InvalidArgument("poisson_residual: shape mismatch");
  const PoissonSystem sys = build_system(mask);
  const int h = dst.height(), w = dst.width();
  double r = 0.0;
  for (int c = 0; c < dst.channels(); ++c) {
    std::vector<double> f(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        f[y * w + x] = mask.at(y, x) ? candidate.at(y, x, c) : dst.at(y, x, c);
    r = std::max(r, residual_of(f, guidance(src, sys, c), sys, Exec::serial));
  }
  return r;
}

namespace {

double cross(Point2 o, Point2 a, Point2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

void check_quad(const Quad& q) {
  double scale = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      scale = std::max(scale, std::hypot(q[i].x - q[j].x, q[i].y - q[j].y));
  if (scale <= 0.0) throw InvalidArgument("homography_warp: degenerate quad");
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const double c = cross(q[i], q[(i + 1) % 4], q[(i + 2) % 4]);
    if (std::abs(c) <= 1e-9 * scale * scale)
      throw InvalidArgument("homography_warp: degenerate quad (collinear corners)");
    const int s = c > 0 ? 1 : -1;
    if (sign != 0 && s != sign) throw InvalidArgument("homography_warp: quad is not convex");
    sign = s;
  }
}

}  // namespace

Mat3 rect_to_quad(double w, double h, const Quad& q) {
  check_quad(q);
  // Unit square -> quad (projective mapping in closed form), then scale.
  const double sx = q[0].x - q[1].x + q[2].x - q[3].x;
  const double sy = q[0].y - q[1].y + q[2].y - q[3].y;
  double g = 0.0, hh = 0.0;
  if (sx != 0.0 || sy != 0.0) {
    const double dx1 = q[1].x - q[2].x, dx2 = q[3].x - q[2].x;
    const double dy1 = q[1].y - q[2].y, dy2 = q[3].y - q[2].y;
    const double den = dx1 * dy2 - dx2 * dy1;
    g = (sx * dy2 - dx2 * sy) / den;
    hh = (dx1 * sy - sx * dy1) / den;
  }
  const double a = q[1].x - q[0].x + g * q[1].x;
  const double b = q[3].x - q[0].x + hh * q[3].x;
  const double d = q[1].y - q[0].y + g * q[1].y;
  const double e = q[3].y - q[0].y + hh * q[3].y;
  return {a / w, b / h, q[0].x, d / w, e / h, q[0].y, g / w, hh / h, 1.0};
}

WarpResult homography_warp(const RasterImage& img, const Quad& quad, int out_h, int out_w) {
  if (img.empty()) throw InvalidArgument("homography_warp: empty image");
  WarpResult res;
  res.h = rect_to_quad(img.width(), img.height(), quad);
  const Mat3 inv = invert3(res.h);
  res.layer = RasterImage(out_h, out_w, img.channels());
  res.coverage = BinaryMask(out_h, out_w);
  const int sw = img.width(), sh = img.height(), ch = img.channels();
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double wz = inv[6] * px + inv[7] * py + inv[8];
      if (wz <= 0.0) continue;
      const double u = (inv[0] * px + inv[1] * py + inv[2]) / wz;
      const double v = (inv[3] * px + inv[4] * py + inv[5]) / wz;
      if (!(u >= 0.0 && u < sw && v >= 0.0 && v < sh)) continue;
      const double fx = u - 0.5, fy = v - 0.5;
      const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
      const double tx = fx - x0, ty = fy - y0;
      const int xa = std::clamp(x0, 0, sw - 1), xb = std::clamp(x0 + 1, 0, sw - 1);
      const int ya = std::clamp(y0, 0, sh - 1), yb = std::clamp(y0 + 1, 0, sh - 1);
      for (int c = 0; c < ch; ++c) {
        const double top = img.at(ya, xa, c) * (1.0 - tx) + img.at(ya, xb, c) * tx;
        const double bot = img.at(yb, xa, c) * (1.0 - tx) + img.at(yb, xb, c) * tx;
        res.layer.at(y, x, c) = static_cast<float>(std::clamp(top * (1.0 - ty) + bot * ty, 0.0, 1.0));
      }
      res.coverage.at(y, x) = 1;
    }
  return res;
}

WarpResult homography_warp(const RasterImage& img, const Quad& quad) {
  return homography_warp(img, quad, img.height(), img.width());
}

BinaryMask dilate(const BinaryMask& mask, int radius, Exec exec) {
  if (radius < 0) throw InvalidArgument("dilate: radius must be >= 0");
  if (radius == 0) return mask;
  std::vector<std::pair<int, int>> offs;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) offs.emplace_back(dx, dy);
  const int h = mask.height(), w = mask.width();
  BinaryMask out(h, w);
  auto row = [&](int y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (auto [dx, dy] : offs) {
        const int yy = y + dy, xx = x + dx;
        if (yy >= 0 && yy < h && xx >= 0 && xx < w && mask.at(yy, xx)) {
          v = 1;
          break;
        }
      }
      out.at(y, x) = v;
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) row(y);
  } else {
    for (int y = 0; y < h; ++y) row(y);
  }
  return out;
}

BinaryMask shift_mask(const BinaryMask& mask, int dx, int dy) {
  BinaryMask out(mask.height(), mask.width());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      const int sy = y - dy, sx = x - dx;
      if (sy >= 0 && sy < mask.height() && sx >= 0 && sx < mask.width())
        out.at(y, x) = mask.at(sy, sx);
    }
  return out;
}

RasterImage sobel_magnitude(const RasterImage& img) {
  const RasterImage g = img.to_gray();
  const int h = g.height(), w = g.width();
  RasterImage out(h, w, 1);
  auto v = [&](int y, int x) { return static_cast<double>(g.at(reflect_index(y, h), reflect_index(x, w))); };
  const double norm = 4.0 * std::numbers::sqrt2;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = (v(y - 1, x + 1) + 2 * v(y, x + 1) + v(y + 1, x + 1)) -
                        (v(y - 1, x - 1) + 2 * v(y, x - 1) + v(y + 1, x - 1));
      const double gy = (v(y + 1, x - 1) + 2 * v(y + 1, x) + v(y + 1, x + 1)) -
                        (v(y - 1, x - 1) + 2 * v(y - 1, x) + v(y - 1, x + 1));
      out.at(y, x) = static_cast<float>(std::min(1.0, std::hypot(gx, gy) / norm));
    }
  return out;
}

RasterImage resize_bilinear(const RasterImage& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0 || img.empty()) throw InvalidArgument("resize_bilinear: bad size");
  RasterImage out(out_h, out_w, img.channels());
  const double sy = static_cast<double>(img.height()) / out_h;
  const double sx = static_cast<double>(img.width()) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const double ty = fy - y0;
    const int ya = std::clamp(y0, 0, img.height() - 1), yb = std::clamp(y0 + 1, 0, img.height() - 1);
    for (int x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const double tx = fx - x0;
      const int xa = std::clamp(x0, 0, img.width() - 1), xb = std::clamp(x0 + 1, 0, img.width() - 1);
      for (int c = 0; c < img.channels(); ++c) {
        const double top = img.at(ya, xa, c) * (1.0 - tx) + img.at(ya, xb, c) * tx;
        const double bot = img.at(yb, xa, c) * (1.0 - tx) + img.at(yb, xb, c) * tx;
        out.at(y, x, c) = static_cast<float>(std::clamp(top * (1.0 - ty) + bot * ty, 0.0, 1.0));
      }
    }
  }
  return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw InvalidArgument("resize_nearest: bad size");
  BinaryMask out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const int sy = std::min(mask.height() - 1, static_cast<int>((y + 0.5) * mask.height() / out_h));
    for (int x = 0; x < out_w; ++x) {
      const int sx = std::min(mask.width() - 1, static_cast<int>((x + 0.5) * mask.width() / out_w));
      out.at(y, x) = mask.at(sy, sx);
    }
  }
  return out;
}

}  // namespace ste
