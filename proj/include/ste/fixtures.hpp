#pragma once

#include <cstdint>
#include <vector>

#include "ste/image.hpp"
#include "ste/synth.hpp"

namespace ste {

// Procedural poster: smooth background, one line of original text in a box
// aligned to an 8-pixel grid, and text-free blanks elsewhere.
struct Fixture {
  RasterImage image;
  std::vector<TextAnnotation> texts;
  std::vector<Rect> blanks;
  BinaryMask ink;       // glyph pixels of the original text (coverage >= 0.5)
  BinaryMask text_box;  // union of the annotation boxes
};

Fixture make_fixture(std::uint64_t seed, int size = 64);

}  // namespace ste
