#include "ste/image.hpp"

#include <algorithm>
#include <cmath>

namespace ste {

RasterImage::RasterImage(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || (channels != 1 && channels != 3))
    throw InvalidArgument("RasterImage: bad shape");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

RasterImage RasterImage::crop(const Rect& r) const {
  if (r.empty() || !r.inside(width_, height_)) throw InvalidArgument("crop: rect out of bounds");
  RasterImage out(r.height(), r.width(), channels_);
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x)
      for (int c = 0; c < channels_; ++c) out.at(y, x, c) = at(r.y0 + y, r.x0 + x, c);
  return out;
}

RasterImage RasterImage::to_gray() const {
  if (channels_ == 1) return *this;
  RasterImage out(height_, width_, 1);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) {
      const double v = 0.299 * at(y, x, 0) + 0.587 * at(y, x, 1) + 0.114 * at(y, x, 2);
      out.at(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  return out;
}

bool RasterImage::valid() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v) && v >= 0.0f && v <= 1.0f; });
}

void RasterImage::clamp01() {
  for (auto& v : data_) v = std::clamp(v, 0.0f, 1.0f);
}

BinaryMask::BinaryMask(int height, int width, std::uint8_t fill)
    : height_(height), width_(width) {
  if (height < 0 || width < 0) throw InvalidArgument("BinaryMask: bad shape");
  data_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

Rect BinaryMask::bounds() const {
  Rect r{width_, height_, 0, 0};
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (at(y, x)) {
        r.x0 = std::min(r.x0, x);
        r.y0 = std::min(r.y0, y);
        r.x1 = std::max(r.x1, x + 1);
        r.y1 = std::max(r.y1, y + 1);
      }
  if (r.empty()) return Rect{};
  return r;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw InvalidArgument("mask_iou: shape mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a.data()[i] & b.data()[i];
    uni += a.data()[i] | b.data()[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace ste
