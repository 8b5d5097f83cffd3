#include "ste/mser.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace ste::mser {

void Params::validate() const {
  if (delta < 1) throw InvalidArgument("mser: delta must be >= 1");
  if (min_area < 1) throw InvalidArgument("mser: min_area must be >= 1");
  if (max_area != 0 && max_area < min_area) throw InvalidArgument("mser: min_area > max_area");
  if (!(max_variation >= 0.0)) throw InvalidArgument("mser: max_variation must be >= 0");
}

std::uint8_t gray_level(float v) {
  const double q = std::floor(static_cast<double>(v) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

namespace {

struct UnionFind {
  std::vector<int> parent, size;
  explicit UnionFind(int n) : parent(n, -1), size(n, 0) {}
  void make(int p) {
    parent[p] = p;
    size[p] = 1;
  }
  bool active(int p) const { return parent[p] >= 0; }
  int find(int p) {
    int r = p;
    while (parent[r] != r) r = parent[r];
    while (parent[p] != r) {
      const int next = parent[p];
      parent[p] = r;
      p = next;
    }
    return r;
  }
};

}  // namespace

ComponentTree build_component_tree(const RasterImage& gray, Polarity polarity) {
  if (gray.channels() != 1) throw InvalidArgument("build_component_tree: expects one channel");
  if (polarity == Polarity::both)
    throw InvalidArgument("build_component_tree: choose a single polarity");
  ComponentTree t;
  t.height_ = gray.height();
  t.width_ = gray.width();
  const int n = t.height_ * t.width_;
  t.levels_.resize(n);
  for (int i = 0; i < n; ++i) {
    const std::uint8_t q = gray_level(gray.data()[i]);
    t.levels_[i] = polarity == Polarity::light_on_dark ? static_cast<std::uint8_t>(255 - q) : q;
  }
  t.owner_.assign(n, -1);
  if (n == 0) return t;

  // Counting sort keeps pixel order stable inside a level.
  std::array<int, 257> start{};
  for (int i = 0; i < n; ++i) ++start[t.levels_[i] + 1];
  std::partial_sum(start.begin(), start.end(), start.begin());
  std::vector<int> order(n);
  {
    auto pos = start;
    for (int i = 0; i < n; ++i) order[pos[t.levels_[i]]++] = i;
  }

  UnionFind uf(n);
  std::vector<int> cur_node(n, -1);          // node of a UF root as of the last finished level
  std::vector<int> touched_stamp(n, -1);     // level at which a root was last touched
  std::vector<std::vector<int>> pending(n);  // child nodes gathered during the current level
  const int w = t.width_, h = t.height_;

  for (int level = 0; level < 256; ++level) {
    const int b = start[level], e = start[level + 1];
    if (b == e) continue;
    std::vector<int> touched;
    auto touch = [&](int r) {
      if (touched_stamp[r] == level) return;
      touched_stamp[r] = level;
      pending[r].clear();
      if (cur_node[r] >= 0) pending[r].push_back(cur_node[r]);
      touched.push_back(r);
    };
    for (int k = b; k < e; ++k) {
      const int p = order[k];
      uf.make(p);
      touch(p);
      const int y = p / w, x = p % w;
      const int nbr[4] = {x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1, y > 0 ? p - w : -1,
                          y + 1 < h ? p + w : -1};
      for (int q : nbr) {
        if (q < 0 || !uf.active(q)) continue;
        int rp = uf.find(p), rq = uf.find(q);
        if (rp == rq) continue;
        touch(rq);
        if (uf.size[rp] < uf.size[rq] || (uf.size[rp] == uf.size[rq] && rq < rp)) std::swap(rp, rq);
        uf.parent[rq] = rp;
        uf.size[rp] += uf.size[rq];
        auto& dst = pending[rp];
        dst.insert(dst.end(), pending[rq].begin(), pending[rq].end());
        pending[rq].clear();
      }
    }
    std::vector<int> roots;
    for (int r : touched)
      if (uf.find(r) == r && touched_stamp[r] == level) roots.push_back(r);
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
    for (int r : roots) {
      const int id = static_cast<int>(t.nodes_.size());
      Node node;
      node.level = level;
      node.area = uf.size[r];
      node.seed_pixel = r;
      t.nodes_.push_back(node);
      auto& kids = pending[r];
      std::sort(kids.begin(), kids.end());
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
        t.nodes_[*it].parent = id;
        t.nodes_[*it].next_sibling = t.nodes_[id].first_child;
        t.nodes_[id].first_child = *it;
      }
      kids.clear();
      cur_node[r] = id;
    }
    for (int k = b; k < e; ++k) t.owner_[order[k]] = cur_node[uf.find(order[k])];
  }
  for (int i = 0; i < static_cast<int>(t.nodes_.size()); ++i)
    if (t.nodes_[i].parent < 0) t.root_ = i;
  return t;
}

std::vector<int> ComponentTree::regions_at(int t) const {
  std::vector<int> label(owner_.size(), -1);
  for (std::size_t p = 0; p < owner_.size(); ++p) {
    if (levels_[p] > t) continue;
    int nd = owner_[p];
    while (nodes_[nd].parent >= 0 && nodes_[nodes_[nd].parent].level <= t) nd = nodes_[nd].parent;
    label[p] = nd;
  }
  return label;
}

std::vector<int> ComponentTree::pixels_of(int node) const {
  std::vector<char> in(nodes_.size(), 0);
  // Node ids are created bottom-up, so descendants always have smaller ids.
  in[node] = 1;
  for (int i = node - 1; i >= 0; --i) {
    const int a = nodes_[i].parent;
    if (a >= 0 && a <= node && in[a]) in[i] = 1;
  }
  std::vector<int> px;
  for (std::size_t p = 0; p < owner_.size(); ++p)
    if (in[owner_[p]]) px.push_back(static_cast<int>(p));
  return px;
}

std::vector<Region> detect_regions(const ComponentTree& tree, const Params& params) {
  params.validate();
  const auto& nodes = tree.nodes();
  const int count = static_cast<int>(nodes.size());
  if (count == 0) return {};
  const int max_area = params.max_area > 0
                           ? params.max_area
                           : static_cast<int>(0.9 * tree.height() * tree.width());

  std::vector<int> largest_child(count, -1);
  for (int i = 0; i < count; ++i) {
    const int p = nodes[i].parent;
    if (p < 0) continue;
    const int c = largest_child[p];
    if (c < 0 || nodes[i].area > nodes[c].area) largest_child[p] = i;
  }

  auto area_up = [&](int nd, int level) {
    while (nodes[nd].parent >= 0 && nodes[nodes[nd].parent].level <= level) nd = nodes[nd].parent;
    return nodes[nd].area;
  };
  auto area_down = [&](int nd, int level) {
    while (nd >= 0 && nodes[nd].level > level) nd = largest_child[nd];
    return nd >= 0 ? nodes[nd].area : 0;
  };

  // Best (lowest) variation over the levels for which the node's pixel set
  // is the extremal region.
  std::vector<double> var(count);
  for (int i = 0; i < count; ++i) {
    const int top = nodes[i].parent >= 0 ? nodes[nodes[i].parent].level - 1 : 255;
    double best = 1e300;
    for (int l = nodes[i].level; l <= top; ++l) {
      const double q = static_cast<double>(area_up(i, l + params.delta) -
                                           area_down(i, l - params.delta)) /
                       nodes[i].area;
      best = std::min(best, q);
    }
    var[i] = best;
  }

  std::vector<Region> out;
  for (int i = 0; i < count; ++i) {
    const auto& nd = nodes[i];
    if (nd.area < params.min_area || nd.area > max_area) continue;
    if (var[i] > params.max_variation) continue;
    if (nd.parent >= 0 && var[i] > var[nd.parent]) continue;
    if (largest_child[i] >= 0 && var[i] > var[largest_child[i]]) continue;
    Region r;
    r.node = i;
    r.level = nd.level;
    r.variation = var[i];
    r.pixels = tree.pixels_of(i);
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

struct PolarityPick {
  BinaryMask mask;
  std::size_t area = 0;
};

PolarityPick run_polarity(const RasterImage& crop, Polarity pol, const Params& params) {
  const int h = crop.height(), w = crop.width();
  const ComponentTree tree = build_component_tree(crop, pol);
  const auto regions = detect_regions(tree, params);
  const auto& nodes = tree.nodes();
  const auto& lv = tree.levels();
  const int band_lo = h / 3, band_hi = std::max(band_lo + 1, h - h / 3);
  PolarityPick pick{BinaryMask(h, w), 0};
  for (const auto& r : regions) {
    bool in_band = false, left = false, right = false, top = false, bottom = false;
    int darkest = 255;
    for (int p : r.pixels) {
      const int y = p / w, x = p % w;
      in_band |= (y >= band_lo && y < band_hi);
      left |= x == 0;
      right |= x == w - 1;
      top |= y == 0;
      bottom |= y == h - 1;
      darkest = std::min(darkest, static_cast<int>(lv[p]));
    }
    // A region spanning the crop is background, not strokes.
    if (!in_band || (left && right) || (top && bottom)) continue;
    // Anti-aliased edges blend linearly between ink and background, so the
    // half-way level between the darkest pixel and the level at which the
    // region merges into its surroundings separates majority-ink pixels.
    const int parent = nodes[r.node].parent;
    const int merge = parent >= 0 ? nodes[parent].level : 255;
    const double cut = 0.5 * (darkest + merge);
    for (int p : r.pixels)
      if (lv[p] <= cut) pick.mask.data()[p] = 1;
  }
  pick.area = pick.mask.count();
  return pick;
}

}  // namespace

Extraction extract_text_mask(const RasterImage& img, const Rect& bbox, const Params& params) {
  params.validate();
  if (bbox.empty() || !bbox.inside(img.width(), img.height()))
    throw InvalidArgument("extract_text_mask: bbox out of bounds");
  const RasterImage crop = img.crop(bbox).to_gray();
  Params p = params;
  if (p.max_area == 0) p.max_area = std::max(p.min_area, static_cast<int>(0.9 * bbox.area()));

  Extraction ex;
  if (params.polarity == Polarity::both) {
    PolarityPick dark = run_polarity(crop, Polarity::dark_on_light, p);
    PolarityPick light = run_polarity(crop, Polarity::light_on_dark, p);
    if (light.area > dark.area) {
      ex.mask = std::move(light.mask);
      ex.chosen = Polarity::light_on_dark;
    } else {
      ex.mask = std::move(dark.mask);
      ex.chosen = Polarity::dark_on_light;
    }
  } else {
    ex.mask = run_polarity(crop, params.polarity, p).mask;
    ex.chosen = params.polarity;
  }
  ex.failed = !ex.mask.any();
  return ex;
}

}  // namespace ste::mser
