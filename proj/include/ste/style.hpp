#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ste/rng.hpp"

namespace ste {

// Element positions in the canonical space.
enum Elem : int {
  kMechanism = 0,
  kFont,
  kSize,
  kColor,
  kBlur,
  kAlpha,
  kPoisson,
  kItalic,
  kCurve,
  kTilt,
  kRotation,
  kShadow,
  kShadowOffset,
  kShadowColor,
  kBorder,
  kBorderWidth,
  kBorderColor,
  kLetterSpacing,
  kOpacity,
  kJitter,
  kNumElements
};

enum Mechanism : int { kCustomize = 0, kReplicate = 1 };

struct StyleElement {
  std::string name;
  int choices = 2;
  // Active only when element `parent` is active and its choice is listed in
  // `parent_allows`. parent = -1 means always active.
  int parent = -1;
  std::vector<int> parent_allows;
};

struct StyleSpace {
  std::vector<StyleElement> elements;

  int size() const { return static_cast<int>(elements.size()); }
  int max_choices() const;
  // Product of choice counts.
  double combinations() const;
  void validate() const;
  int index_of(const std::string& name) const;
};

StyleSpace default_space();

struct StyleVector {
  std::vector<int> choices;
  std::uint64_t seed = 0;

  int operator[](int e) const { return choices[e]; }
  friend bool operator==(const StyleVector&, const StyleVector&) = default;
};

// Throws InvalidArgument when s does not index into space.
void validate_style(const StyleSpace& space, const StyleVector& s);

std::vector<std::uint8_t> hierarchy_mask(const StyleSpace& space, const StyleVector& s);

StyleVector sample_uniform(const StyleSpace& space, Rng& rng);

}  // namespace ste
