#include "ste/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace ste {

std::uint8_t quantize8(float v) {
  const double q = std::floor(static_cast<double>(v) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct Decoded {
  int h = 0, w = 0, channels = 0;
  std::vector<std::uint8_t> px;
};

Decoded decode(const std::string& path, bool want_gray) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw FormatError(path + ": not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  Decoded d;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": corrupt PNG");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool is_gray = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (want_gray && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (!want_gray && is_gray) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  d.w = static_cast<int>(png_get_image_width(png, info));
  d.h = static_cast<int>(png_get_image_height(png, info));
  d.channels = png_get_channels(png, info);
  d.px.resize(static_cast<std::size_t>(d.w) * d.h * d.channels);
  std::vector<png_bytep> rows(d.h);
  for (int y = 0; y < d.h; ++y) rows[y] = d.px.data() + static_cast<std::size_t>(y) * d.w * d.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return d;
}

void encode(const std::string& path, int h, int w, int channels, const std::vector<std::uint8_t>& px) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, w, h, 8, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = const_cast<png_bytep>(px.data() + static_cast<std::size_t>(y) * w * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RasterImage read_png(const std::string& path, int channels) {
  if (channels != 1 && channels != 3) throw InvalidArgument("read_png: channels must be 1 or 3");
  const Decoded d = decode(path, channels == 1);
  RasterImage img(d.h, d.w, channels);
  auto out = img.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(d.px[i] / 255.0);
  return img;
}

void write_png(const std::string& path, const RasterImage& img) {
  std::vector<std::uint8_t> px(img.size());
  auto in = img.data();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = quantize8(in[i]);
  encode(path, img.height(), img.width(), img.channels(), px);
}

BinaryMask read_mask_png(const std::string& path) {
  const Decoded d = decode(path, true);
  BinaryMask m(d.h, d.w);
  auto out = m.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (d.px[i] != 0 && d.px[i] != 255)
      throw FormatError(path + ": mask values must be 0 or 255");
    out[i] = d.px[i] ? 1 : 0;
  }
  return m;
}

void write_mask_png(const std::string& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> px(mask.size());
  auto in = mask.data();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = in[i] ? 255 : 0;
  encode(path, mask.height(), mask.width(), 1, px);
}

RasterImage quantize_image(const RasterImage& img) {
  RasterImage out = img;
  for (auto& v : out.data()) v = static_cast<float>(quantize8(v) / 255.0);
  return out;
}

}  // namespace ste
