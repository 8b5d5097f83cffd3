#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ste/image.hpp"

namespace ste::mser {

enum class Polarity { dark_on_light, light_on_dark, both };

struct Params {
  int delta = 5;
  int min_area = 8;
  int max_area = 0;            // 0 -> 90% of the analysed area
  double max_variation = 0.5;
  Polarity polarity = Polarity::both;

  void validate() const;
};

// One extremal region. Its pixels are the pixels owned by the node plus the
// pixels of all its descendants.
struct Node {
  int level = 0;  // threshold at which the region first appears
  int area = 0;
  int parent = -1;
  int first_child = -1;
  int next_sibling = -1;
  int seed_pixel = 0;  // representative pixel (flat index)
};

class ComponentTree {
 public:
  int height() const { return height_; }
  int width() const { return width_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  // Smallest node containing each pixel.
  const std::vector<int>& owner() const { return owner_; }
  const std::vector<std::uint8_t>& levels() const { return levels_; }
  int root() const { return root_; }

  // Connected-component labelling of {p : level(p) <= t}, expressed as node
  // ids; -1 for pixels above the threshold.
  std::vector<int> regions_at(int t) const;
  std::vector<int> pixels_of(int node) const;

 private:
  friend ComponentTree build_component_tree(const RasterImage&, Polarity);
  int height_ = 0, width_ = 0, root_ = -1;
  std::vector<Node> nodes_;
  std::vector<int> owner_;
  std::vector<std::uint8_t> levels_;
};

// Quantized gray level of a single-channel pixel: round(v * 255).
std::uint8_t gray_level(float v);

// Union-find flood over pixels sorted by level, 4-connectivity.
// light_on_dark processes the inverted image; `both` is not accepted here.
ComponentTree build_component_tree(const RasterImage& gray, Polarity polarity);

struct Region {
  int node = -1;
  int level = 0;
  double variation = 0.0;
  std::vector<int> pixels;  // sorted flat indices
};

// Regions whose stability (|R+d| - |R-d|) / |R| is a local minimum along the
// tree path, within max_variation, with area inside the bounds. Ordered by
// node id (deterministic).
std::vector<Region> detect_regions(const ComponentTree& tree, const Params& params);

struct Extraction {
  BinaryMask mask;  // bbox-local stroke mask
  bool failed = false;
  Polarity chosen = Polarity::dark_on_light;
};

// Runs detection on the bbox crop for both polarities and unions the regions
// that cross the crop's horizontal centre band and do not span the crop.
// Each region keeps the pixels at or below the midpoint between its darkest
// level and the level at which it merges, which drops anti-aliased fringes.
Extraction extract_text_mask(const RasterImage& img, const Rect& bbox, const Params& params = {});

}  // namespace ste::mser
