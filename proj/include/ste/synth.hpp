#pragma once

#include <string>
#include <vector>

#include "ste/image.hpp"
#include "ste/mser.hpp"
#include "ste/style.hpp"

namespace ste {

struct TextAnnotation {
  Rect bbox;
  std::string content;
  friend bool operator==(const TextAnnotation&, const TextAnnotation&) = default;
};

// Numeric value behind every choice index of the non-categorical elements.
// Each table must keep the choice count of its element.
struct StyleValues {
  std::vector<double> size_px{8, 10, 12, 14, 16, 18, 20, 22};
  std::vector<double> blur_sigma{0, 0.5, 1, 1.5};
  std::vector<double> alpha{0, 0.1, 0.2, 0.3};
  std::vector<double> curve{0, 0.08, 0.16, 0.24};  // arc height / text height
  std::vector<double> tilt{0, 0.1, 0.2, 0.3};      // right edge shrink fraction
  std::vector<double> rotation_deg{-10, -5, 0, 5, 10};
  std::vector<double> shadow_offset{1, 2, 3, 4};
  std::vector<double> border_width{1, 2, 3, 4};
  std::vector<double> letter_spacing{0, 1, 2};
  std::vector<double> opacity{1, 0.9, 0.8, 0.7};
  std::vector<double> jitter{0, 1, 2, 3};  // max offset in units of 2 px

  void validate(const StyleSpace& space) const;
};

struct SynthOptions {
  StyleValues values;
  std::vector<std::string> words{"SALE", "OPEN", "NEW", "Text", "hello", "FREE", "2024", "shop"};
  mser::Params mser;
  double italic_shear = 0.25;
  // Replicated strokes are scaled by size_px / replicate_reference_px.
  double replicate_reference_px = 16;
  int min_text_px = 4;
};

struct SynthSample {
  RasterImage i_syn;
  BinaryMask m_syn;
  RasterImage ground_truth;
  StyleVector style;
  Rect placement;
  std::string content;
  // Replication was requested but no strokes were available, so the text
  // was rendered with the customize pipeline instead.
  bool fallback = false;
};

// Window of the given size with the least Sobel energy; ties go to the
// top-most, then left-most window.
Rect choose_blank(const RasterImage& img, int win_h, int win_w);

// Renders styled text into a blank of img. With no blanks, one is chosen
// by choose_blank. Throws PlacementError when nothing fits.
SynthSample synthesize(const RasterImage& img, const std::vector<TextAnnotation>& annotations,
                       const std::vector<Rect>& blanks, const StyleVector& s,
                       const SynthOptions& opts = {});

}  // namespace ste
