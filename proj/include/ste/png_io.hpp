#pragma once

#include <cstdint>
#include <string>

#include "ste/image.hpp"

namespace ste {

// 8-bit quantization used on every write: round-half-up of v * 255.
std::uint8_t quantize8(float v);

// Reads any 8-bit PNG and returns it with `channels` (1 or 3) channels.
RasterImage read_png(const std::string& path, int channels = 3);
void write_png(const std::string& path, const RasterImage& img);

// Masks are stored as 8-bit grayscale with values {0, 255}.
BinaryMask read_mask_png(const std::string& path);
void write_mask_png(const std::string& path, const BinaryMask& mask);

// Rounds an image through the 8-bit representation (what a write/read pair does).
RasterImage quantize_image(const RasterImage& img);

}  // namespace ste
