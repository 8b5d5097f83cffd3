#include "ste/fixtures.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "ste/rng.hpp"
#include "ste/text_render.hpp"

namespace ste {

namespace {

const std::array<const char*, 12> kWords = {"SALE", "Open", "MENU", "cafe", "Jazz", "BOOK",
                                            "Shop", "LIVE", "tea", "NEWS", "Art", "Film"};

}  // namespace

Fixture make_fixture(std::uint64_t seed, int size) {
  if (size < 32 || size % 8) throw InvalidArgument("make_fixture: size must be a multiple of 8, >= 32");
  Rng rng(derive_seed(seed, {0xf1}));
  Fixture f;
  f.image = RasterImage(size, size, 3);

  std::array<double, 3> c0, c1;
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.05, 0.95);
    c1[c] = std::clamp(c0[c] + rng.uniform(-0.25, 0.25), 0.0, 1.0);
  }
  const double angle = rng.uniform(0, 6.283185307179586);
  struct Blob {
    double x, y, r, amp;
  };
  std::array<Blob, 3> blobs;
  for (auto& b : blobs)
    b = {rng.uniform(0, size), rng.uniform(0, size), rng.uniform(0.15, 0.4) * size, rng.uniform(-0.12, 0.12)};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double t = 0.5 + 0.5 * ((x - size / 2.0) * std::cos(angle) + (y - size / 2.0) * std::sin(angle)) / size;
      double bump = 0;
      for (const auto& b : blobs)
        bump += b.amp * std::exp(-((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (2 * b.r * b.r));
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - t) * c0[c] + t * c1[c] + bump + 0.01 * rng.normal();
        f.image.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }

  // Text in the upper or lower band; the other band and the middle are blanks.
  const int g = size / 8;
  const bool top = rng.below(2) == 0;
  const Rect box{g, top ? g : size - 3 * g, size - g, top ? 3 * g : size - g};
  const Rect other{g / 2, top ? size - 3 * g : g, size - g / 2, top ? size - g : 3 * g};
  const Rect middle{g / 2, 3 * g + 1, size - g / 2, size - 3 * g - 1};
  f.blanks = {other, middle};

  const std::string word = kWords[rng.below(static_cast<int>(kWords.size()))];
  const int font = rng.below(font_count());
  RasterImage glyph;
  for (int px = std::max(8, box.height() - 2); px >= 6; --px) {
    glyph = render_text(word, font, px);
    if (glyph.height() <= box.height() - 2 && glyph.width() <= box.width() - 2) break;
  }
  if (glyph.height() > box.height() - 2 || glyph.width() > box.width() - 2)
    throw InvalidArgument("make_fixture: word does not fit its box");

  std::array<double, 3> bg{0, 0, 0};
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x)
      for (int c = 0; c < 3; ++c) bg[c] += f.image.at(y, x, c) / box.area();
  const double luma = 0.299 * bg[0] + 0.587 * bg[1] + 0.114 * bg[2];
  std::array<double, 3> ink;
  for (int c = 0; c < 3; ++c)
    ink[c] = luma > 0.5 ? rng.uniform(0.0, 0.2) : rng.uniform(0.8, 1.0);

  const int ox = box.x0 + (box.width() - glyph.width()) / 2;
  const int oy = box.y0 + (box.height() - glyph.height()) / 2;
  f.ink = BinaryMask(size, size);
  for (int y = 0; y < glyph.height(); ++y)
    for (int x = 0; x < glyph.width(); ++x) {
      const double a = glyph.at(y, x);
      if (a >= 0.5) f.ink.at(oy + y, ox + x) = 1;
      for (int c = 0; c < 3; ++c) {
        float& p = f.image.at(oy + y, ox + x, c);
        p = static_cast<float>(a * ink[c] + (1 - a) * p);
      }
    }
  f.texts = {{box, word}};
  f.text_box = BinaryMask(size, size);
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x) f.text_box.at(y, x) = 1;
  return f;
}

}  // namespace ste
