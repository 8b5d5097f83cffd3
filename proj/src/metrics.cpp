#include "ste/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "ste/png_io.hpp"

namespace ste {

namespace fs = std::filesystem;

namespace {

void check_pair(const RasterImage& a, const RasterImage& b, const char* what) {
  if (!a.same_shape(b) || a.empty())
    throw InvalidArgument(std::string(what) + ": shape mismatch " + std::to_string(a.height()) + "x" +
                          std::to_string(a.width()) + "x" + std::to_string(a.channels()) + " vs " +
                          std::to_string(b.height()) + "x" + std::to_string(b.width()) + "x" +
                          std::to_string(b.channels()));
}

std::vector<double> luma(const RasterImage& img) {
  std::vector<double> y(static_cast<std::size_t>(img.height()) * img.width());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      double v;
      if (img.channels() >= 3)
        v = 0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
      else
        v = img.at(r, c, 0);
      y[static_cast<std::size_t>(r) * img.width() + c] = v;
    }
  return y;
}

}  // namespace

double psnr(const RasterImage& a, const RasterImage& b) {
  check_pair(a, b, "psnr");
  double se = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.data().size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const RasterImage& a, const RasterImage& b) {
  check_pair(a, b, "ssim");
  constexpr int k = 7, r = 3;
  if (a.height() < k || a.width() < k) throw InvalidArgument("ssim: images must be at least 7x7");
  double w[k][k], total = 0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) total += w[i][j] = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2 * 1.5 * 1.5));
  for (auto& row : w)
    for (double& v : row) v /= total;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const std::vector<double> x = luma(a), y = luma(b);
  const int h = a.height(), wd = a.width();
  double sum = 0;
  for (int cy = r; cy < h - r; ++cy)
    for (int cx = r; cx < wd - r; ++cx) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          const std::size_t p = static_cast<std::size_t>(cy - r + i) * wd + (cx - r + j);
          const double wi = w[i][j];
          mx += wi * x[p];
          my += wi * y[p];
          xx += wi * x[p] * x[p];
          yy += wi * y[p] * y[p];
          xy += wi * x[p] * y[p];
        }
      const double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
      sum += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return sum / (static_cast<double>(h - 2 * r) * (wd - 2 * r));
}

EvalReport evaluate(const std::string& pairs_dir) {
  if (!fs::is_directory(pairs_dir)) throw InvalidArgument("pairs directory '" + pairs_dir + "' does not exist");
  std::map<std::string, int> sides;  // bit 0 pred, bit 1 gt
  for (const auto& e : fs::directory_iterator(pairs_dir)) {
    const std::string n = e.path().filename().string();
    for (const auto& [suffix, bit] : {std::pair{std::string("_pred.png"), 1}, std::pair{std::string("_gt.png"), 2}})
      if (n.size() > suffix.size() && n.compare(n.size() - suffix.size(), suffix.size(), suffix) == 0)
        sides[n.substr(0, n.size() - suffix.size())] |= bit;
  }
  if (sides.empty()) throw InvalidArgument("no {id}_pred.png/{id}_gt.png pairs in '" + pairs_dir + "'");
  std::string unmatched;
  for (const auto& [id, bits] : sides)
    if (bits != 3) unmatched += (unmatched.empty() ? "" : ", ") + id;
  if (!unmatched.empty()) throw InvalidArgument("unmatched ids in '" + pairs_dir + "': " + unmatched);

  EvalReport rep;
  for (const auto& [id, bits] : sides) {
    const RasterImage pred = read_png((fs::path(pairs_dir) / (id + "_pred.png")).string());
    const RasterImage gt = read_png((fs::path(pairs_dir) / (id + "_gt.png")).string());
    if (!pred.same_shape(gt)) throw InvalidArgument("pair '" + id + "' has mismatched shapes");
    rep.rows.push_back({id, psnr(pred, gt), ssim(pred, gt)});
  }
  for (const auto& row : rep.rows) {
    rep.mean_psnr += row.psnr;
    rep.mean_ssim += row.ssim;
  }
  rep.mean_psnr /= static_cast<double>(rep.rows.size());
  rep.mean_ssim /= static_cast<double>(rep.rows.size());
  return rep;
}

void write_eval_csv(const EvalReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  char buf[128];
  out << "id,psnr,ssim\n";
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", row.psnr, row.ssim);
    out << row.id << buf;
  }
  std::snprintf(buf, sizeof buf, "mean,%.6f,%.6f\n", r.mean_psnr, r.mean_ssim);
  out << buf << "FID,not computed,\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace ste
