#pragma once

#include <array>
#include <vector>

#include "ste/exec.hpp"
#include "ste/image.hpp"

namespace ste {

struct Point2 {
  double x = 0, y = 0;
};

// Corners in order: top-left, top-right, bottom-right, bottom-left of the
// source rectangle they receive.
using Quad = std::array<Point2, 4>;

using Mat3 = std::array<double, 9>;  // row-major

Point2 apply_homography(const Mat3& h, Point2 p);
Mat3 invert3(const Mat3& m);

// 1-D normalized Gaussian taps for offsets -r..r with r = ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

// Symmetric ("half-sample") reflection of an index into [0, n).
int reflect_index(int i, int n);

RasterImage gaussian_blur(const RasterImage& img, double sigma, Exec exec = Exec::parallel);

// Inside mask: (1-a) fg + a bg. Outside: bg.
RasterImage alpha_blend(const RasterImage& fg, const RasterImage& bg, const BinaryMask& mask,
                        double a);

struct PoissonResult {
  RasterImage image;
  double residual = 0.0;
  int iterations = 0;
};

struct PoissonOptions {
  double tol = 1e-4;
  int max_iters = 0;  // 0 -> 10 * interior pixel count
  Exec exec = Exec::parallel;
};

// Guided interpolation: Laplacian of the result matches the Laplacian of src
// on the mask, with dst as Dirichlet boundary. Red-black SOR, per channel.
// Throws ConvergenceError carrying the final residual when tol is not met.
PoissonResult poisson_blend(const RasterImage& src, const RasterImage& dst, const BinaryMask& mask,
                            const PoissonOptions& opts = {});

// Max |b - A f| over mask pixels for a candidate solution (same system as
// poisson_blend). Exposed for tests and idempotence checks.
double poisson_residual(const RasterImage& src, const RasterImage& dst, const BinaryMask& mask,
                        const RasterImage& candidate);

// Homography taking the source rectangle [0,w]x[0,h] onto quad.
Mat3 rect_to_quad(double w, double h, const Quad& quad);

struct WarpResult {
  RasterImage layer;
  BinaryMask coverage;
  Mat3 h{};
};

// Warps img onto an out_h x out_w canvas so that its extent lands on quad.
// Bilinear sampling; canvas pixels whose centre maps outside the source are
// left at 0 and flagged 0 in coverage.
WarpResult homography_warp(const RasterImage& img, const Quad& quad, int out_h, int out_w);
WarpResult homography_warp(const RasterImage& img, const Quad& quad);

// Disc structuring element: offsets with Euclidean length <= radius.
BinaryMask dilate(const BinaryMask& mask, int radius, Exec exec = Exec::parallel);

BinaryMask shift_mask(const BinaryMask& mask, int dx, int dy);

// Sobel gradient magnitude of the luma channel, reflect boundary.
RasterImage sobel_magnitude(const RasterImage& img);

RasterImage resize_bilinear(const RasterImage& img, int out_h, int out_w);
BinaryMask resize_nearest(const BinaryMask& mask, int out_h, int out_w);

}  // namespace ste
