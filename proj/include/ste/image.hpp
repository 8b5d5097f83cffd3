#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ste/errors.hpp"

namespace ste {

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Rect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  int area() const { return empty() ? 0 : width() * height(); }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool inside(int w, int h) const { return x0 >= 0 && y0 >= 0 && x1 <= w && y1 <= h; }
  bool overlaps(const Rect& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Dense float raster, interleaved channels, row-major, values in [0,1].
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int height, int width, int channels, float fill = 0.0f);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int y, int x, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int y, int x, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool same_shape(const RasterImage& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  RasterImage crop(const Rect& r) const;
  // Luma (0.299 R + 0.587 G + 0.114 B); single-channel images are copied.
  RasterImage to_gray() const;
  // True when every value is finite and within [0,1].
  bool valid() const;
  void clamp01();

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int height_ = 0, width_ = 0, channels_ = 0;
  std::vector<float> data_;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::uint8_t fill = 0);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int y, int x) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> data() const { return data_; }

  std::size_t count() const;
  bool any() const { return count() > 0; }
  bool same_shape(const RasterImage& img) const {
    return height_ == img.height() && width_ == img.width();
  }
  bool same_shape(const BinaryMask& o) const {
    return height_ == o.height_ && width_ == o.width_;
  }
  // Tight bounding box of set pixels; empty Rect when the mask is empty.
  Rect bounds() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int height_ = 0, width_ = 0;
  std::vector<std::uint8_t> data_;
};

double mask_iou(const BinaryMask& a, const BinaryMask& b);

}  // namespace ste
