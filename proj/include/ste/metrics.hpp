#pragma once

#include <string>
#include <vector>

#include "ste/image.hpp"

namespace ste {

constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) over all channels; kPsnrCap when MSE < 1e-10.
double psnr(const RasterImage& a, const RasterImage& b);

// Mean SSIM over all valid 7x7 windows (Gaussian, sigma 1.5) of the luma
// channel, K1 = 0.01, K2 = 0.03, L = 1. Images need at least 7x7 pixels.
double ssim(const RasterImage& a, const RasterImage& b);

struct EvalRow {
  std::string id;
  double psnr = 0, ssim = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_psnr = 0, mean_ssim = 0;
};

// Pairs are {id}_pred.png / {id}_gt.png. Throws InvalidArgument when the
// directory holds no pairs or when an id has only one side.
EvalReport evaluate(const std::string& pairs_dir);

// Per-image rows, then a "mean" row, then "FID,not computed".
void write_eval_csv(const EvalReport& r, const std::string& path);

}  // namespace ste
