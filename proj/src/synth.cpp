#include "ste/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>

#include "ste/image_ops.hpp"
#include "ste/rng.hpp"
#include "ste/text_render.hpp"

namespace ste {

namespace {

enum Tag : std::uint64_t {
  kTagContent = 1,
  kTagSource,
  kTagBlank,
  kTagJitter,
  kTagSampleColor,
  kTagFallbackFont,
  kTagFallbackColor,
};

using Color = std::array<double, 3>;

// Premultiplied colour plus coverage, both in layer-local coordinates.
struct Layer {
  RasterImage rgb;
  RasterImage alpha;
  int height() const { return alpha.height(); }
  int width() const { return alpha.width(); }
  bool empty() const { return alpha.empty(); }
};

// Coverage-only parts of customized text, coloured after placement.
struct Parts {
  RasterImage text, border, shadow;
};

RasterImage pad1(const RasterImage& img, int p) {
  RasterImage out(img.height() + 2 * p, img.width() + 2 * p, img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(y + p, x + p, c) = img.at(y, x, c);
  return out;
}

Layer pad(const Layer& l, int p) { return {pad1(l.rgb, p), pad1(l.alpha, p)}; }

// Vertical arc displacement: column x is lifted by amp * sin(pi * u).
RasterImage curve1(const RasterImage& img, double amp) {
  const int off = static_cast<int>(std::ceil(amp));
  const int h = img.height(), w = img.width();
  RasterImage out(h + off, w, img.channels());
  for (int x = 0; x < w; ++x) {
    const double lift = amp * std::sin(std::numbers::pi * (x + 0.5) / w);
    for (int y = 0; y < h + off; ++y) {
      const double sy = y - off + lift;
      const int y0 = static_cast<int>(std::floor(sy));
      const double t = sy - y0;
      for (int c = 0; c < img.channels(); ++c) {
        const double a = (y0 >= 0 && y0 < h) ? img.at(y0, x, c) : 0.0;
        const double b = (y0 + 1 >= 0 && y0 + 1 < h) ? img.at(y0 + 1, x, c) : 0.0;
        out.at(y, x, c) = static_cast<float>((1.0 - t) * a + t * b);
      }
    }
  }
  return out;
}

struct Geometry {
  double shear = 0, tilt = 0, rotation_rad = 0, curve = 0;
  bool identity() const { return shear == 0 && tilt == 0 && rotation_rad == 0 && curve == 0; }
};

Quad geometry_quad(double w, double h, const Geometry& g) {
  Quad q{{{0, 0}, {w, 0}, {w, h}, {0, h}}};
  q[0].x += g.shear * h;
  q[1].x += g.shear * h;
  q[1].y += 0.5 * g.tilt * h;
  q[2].y -= 0.5 * g.tilt * h;
  const double cx = 0.5 * w, cy = 0.5 * h;
  const double cs = std::cos(g.rotation_rad), sn = std::sin(g.rotation_rad);
  for (auto& p : q) {
    const double dx = p.x - cx, dy = p.y - cy;
    p = {cx + cs * dx - sn * dy, cy + sn * dx + cs * dy};
  }
  double minx = q[0].x, miny = q[0].y;
  for (const auto& p : q) {
    minx = std::min(minx, p.x);
    miny = std::min(miny, p.y);
  }
  for (auto& p : q) {
    p.x -= std::floor(minx);
    p.y -= std::floor(miny);
  }
  return q;
}

// Applies the same geometry to every channel group of a layer.
std::vector<RasterImage> apply_geometry(const std::vector<RasterImage>& planes, const Geometry& g) {
  if (g.identity()) return planes;
  std::vector<RasterImage> cur = planes;
  if (g.curve > 0)
    for (auto& p : cur) p = curve1(p, g.curve * p.height());
  if (g.shear == 0 && g.tilt == 0 && g.rotation_rad == 0) return cur;
  const Quad q = geometry_quad(cur[0].width(), cur[0].height(), g);
  double maxx = 0, maxy = 0;
  for (const auto& p : q) {
    maxx = std::max(maxx, p.x);
    maxy = std::max(maxy, p.y);
  }
  const int oh = static_cast<int>(std::ceil(maxy)), ow = static_cast<int>(std::ceil(maxx));
  for (auto& p : cur) p = homography_warp(p, q, oh, ow).layer;
  return cur;
}

Color luma_contrast(const Color& bg) {
  const auto luma = [](const Color& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; };
  Color c{1 - bg[0], 1 - bg[1], 1 - bg[2]};
  if (std::abs(luma(c) - luma(bg)) < 0.35) c = luma(bg) > 0.5 ? Color{0, 0, 0} : Color{1, 1, 1};
  return c;
}

Color region_mean(const RasterImage& img, const Rect& r) {
  Color m{0, 0, 0};
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x)
      for (int c = 0; c < 3; ++c) m[c] += img.at(y, x, c);
  for (auto& v : m) v /= std::max(1, r.area());
  return m;
}

Color scaled(const Color& c, double f) { return {c[0] * f, c[1] * f, c[2] * f}; }

struct Placement {
  Rect blank;
  double scale = 1.0;
};

std::optional<Placement> fit(const Rect& blank, int lh, int lw, double nominal_px, int min_px) {
  const double s = std::min({1.0, static_cast<double>(blank.width()) / lw,
                             static_cast<double>(blank.height()) / lh});
  if (s < 1.0 && nominal_px * s < min_px) return std::nullopt;
  if (std::max(1, static_cast<int>(std::floor(lw * s))) > blank.width() ||
      std::max(1, static_cast<int>(std::floor(lh * s))) > blank.height())
    return std::nullopt;
  return Placement{blank, s};
}

Placement place(const RasterImage& img, const std::vector<Rect>& blanks, int lh, int lw,
                double nominal_px, const StyleVector& s, const SynthOptions& opts) {
  if (blanks.empty()) {
    // Leave a one-pixel ring so Poisson blending always has a boundary.
    const double s0 = std::min({1.0, (img.width() - 2.0) / lw, (img.height() - 2.0) / lh});
    const int h = std::max(1, static_cast<int>(std::floor(lh * s0)));
    const int w = std::max(1, static_cast<int>(std::floor(lw * s0)));
    if (s0 <= 0 || nominal_px * s0 < opts.min_text_px)
      throw PlacementError("text does not fit into the image");
    return {choose_blank(img, h, w), s0};
  }
  const int n = static_cast<int>(blanks.size());
  const int first = static_cast<int>(derive_seed(s.seed, {kTagBlank}) % static_cast<std::uint64_t>(n));
  for (int k = 0; k < n; ++k) {
    const Rect& b = blanks[(first + k) % n];
    if (auto p = fit(b, lh, lw, nominal_px, opts.min_text_px)) return *p;
  }
  throw PlacementError("no blank can host the text");
}

// Top-left corner inside the blank: centred, then jittered.
std::pair<int, int> position(const Rect& blank, int lh, int lw, double jitter_units,
                             std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kTagJitter}));
  const int range = static_cast<int>(2 * jitter_units);
  const int dx = range ? rng.below(2 * range + 1) - range : 0;
  const int dy = range ? rng.below(2 * range + 1) - range : 0;
  const int x = std::clamp(blank.x0 + (blank.width() - lw) / 2 + dx, blank.x0, blank.x1 - lw);
  const int y = std::clamp(blank.y0 + (blank.height() - lh) / 2 + dy, blank.y0, blank.y1 - lh);
  return {x, y};
}

RasterImage resize_or_keep(const RasterImage& img, int h, int w) {
  return (img.height() == h && img.width() == w) ? img : resize_bilinear(img, h, w);
}

// Nearest-neighbour coverage with colour taken from the stroke pixels only.
Layer scale_crisp(const Layer& l, int h, int w) {
  if (l.height() == h && l.width() == w) return l;
  BinaryMask m(l.height(), l.width());
  for (int y = 0; y < l.height(); ++y)
    for (int x = 0; x < l.width(); ++x) m.at(y, x) = l.alpha.at(y, x) >= 0.5f;
  const BinaryMask mn = resize_nearest(m, h, w);
  const RasterImage prgb = resize_bilinear(l.rgb, h, w);
  const RasterImage pa = resize_bilinear(l.alpha, h, w);
  Layer out{RasterImage(h, w, 3), RasterImage(h, w, 1)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mn.at(y, x) || pa.at(y, x) <= 0.0f) continue;
      out.alpha.at(y, x) = 1.0f;
      for (int c = 0; c < 3; ++c)
        out.rgb.at(y, x, c) = std::clamp(prgb.at(y, x, c) / pa.at(y, x), 0.0f, 1.0f);
    }
  return out;
}

struct Appearance {
  double blur = 0, alpha = 0, opacity = 1;
  bool poisson = false;
};

void composite(SynthSample& out, const RasterImage& img, Layer layer, int x0, int y0,
               const Appearance& ap) {
  if (ap.blur > 0) {
    const int r = static_cast<int>(std::ceil(3 * ap.blur));
    layer = pad(layer, r);
    x0 -= r;
    y0 -= r;
    layer.rgb = gaussian_blur(layer.rgb, ap.blur);
    layer.alpha = gaussian_blur(layer.alpha, ap.blur);
  }
  const int H = img.height(), W = img.width();
  out.i_syn = img;
  out.m_syn = BinaryMask(H, W);
  for (int ly = 0; ly < layer.height(); ++ly)
    for (int lx = 0; lx < layer.width(); ++lx) {
      const int y = y0 + ly, x = x0 + lx;
      if (y < 0 || y >= H || x < 0 || x >= W) continue;
      const double a = ap.opacity * layer.alpha.at(ly, lx);
      if (a <= 1.0 / 512) continue;
      out.m_syn.at(y, x) = 1;
      for (int c = 0; c < 3; ++c) {
        const double bg = img.at(y, x, c);
        const double col = ap.opacity * layer.rgb.at(ly, lx, c) + (1.0 - a) * bg;
        out.i_syn.at(y, x, c) = static_cast<float>(std::clamp((1.0 - ap.alpha) * col + ap.alpha * bg, 0.0, 1.0));
      }
    }
  if (!out.m_syn.any()) throw PlacementError("rendered text has no visible coverage");
  if (ap.poisson) {
    const BinaryMask grown = dilate(out.m_syn, 1);
    const Rect b = grown.bounds();
    if (b.x0 >= 1 && b.y0 >= 1 && b.x1 <= W - 1 && b.y1 <= H - 1) {
      try {
        out.i_syn = poisson_blend(out.i_syn, img, grown).image;
        out.m_syn = grown;
      } catch (const ConvergenceError&) {
        // Keep the plain composite; the solver default budget is generous.
      }
    }
  }
}

struct Resolved {
  int font, color, spacing;
  bool shadow, border;
  int shadow_offset, shadow_color, border_width, border_color;
};

Resolved resolve_custom(const StyleVector& s, const SynthOptions& o, bool fallback) {
  const StyleValues& v = o.values;
  if (fallback) {
    // Replication failed: the customization elements are inactive in s, so
    // their stand-ins come from the seed and not from s.
    return {static_cast<int>(derive_seed(s.seed, {kTagFallbackFont}) % 6),
            static_cast<int>(derive_seed(s.seed, {kTagFallbackColor}) % 8),
            0, false, false, 0, 0, 0, 0};
  }
  return {s[kFont], s[kColor], static_cast<int>(v.letter_spacing[s[kLetterSpacing]]),
          s[kShadow] == 1, s[kBorder] == 1,
          static_cast<int>(v.shadow_offset[s[kShadowOffset]]), s[kShadowColor],
          static_cast<int>(v.border_width[s[kBorderWidth]]), s[kBorderColor]};
}

Color text_color(int choice, const Color& bg, const RasterImage& img, std::uint64_t seed) {
  switch (choice) {
    case 0: return {0, 0, 0};
    case 1: return {1, 1, 1};
    case 2: return {0.85, 0.1, 0.1};
    case 3: return {0.1, 0.2, 0.85};
    case 4: return {0.1, 0.65, 0.2};
    case 5: return {0.95, 0.85, 0.1};
    case 6: return luma_contrast(bg);
    default: {
      Rng rng(derive_seed(seed, {kTagSampleColor}));
      const int y = rng.below(img.height()), x = rng.below(img.width());
      return {img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)};
    }
  }
}

Parts build_parts(const RasterImage& glyph, const Resolved& r) {
  const int p = std::max(r.border ? r.border_width : 0, r.shadow ? r.shadow_offset : 0);
  Parts parts{pad1(glyph, p), RasterImage(glyph.height() + 2 * p, glyph.width() + 2 * p, 1),
              RasterImage(glyph.height() + 2 * p, glyph.width() + 2 * p, 1)};
  if (!r.border && !r.shadow) return parts;
  const int h = parts.text.height(), w = parts.text.width();
  BinaryMask g(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) g.at(y, x) = parts.text.at(y, x) >= 0.5f;
  BinaryMask solid = g;
  if (r.border) {
    solid = dilate(g, r.border_width);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) parts.border.at(y, x) = solid.at(y, x) && !g.at(y, x);
  }
  if (r.shadow) {
    const BinaryMask sh = shift_mask(solid, r.shadow_offset, r.shadow_offset);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) parts.shadow.at(y, x) = sh.at(y, x);
  }
  return parts;
}

Layer colorize(const Parts& parts, const Color& tc, const Color& bc, const Color& sc) {
  const int h = parts.text.height(), w = parts.text.width();
  Layer l{RasterImage(h, w, 3), RasterImage(h, w, 1)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double a = 0;
      std::array<double, 3> p{0, 0, 0};
      const std::array<std::pair<double, const Color*>, 3> stack{
          {{parts.shadow.at(y, x), &sc}, {parts.border.at(y, x), &bc}, {parts.text.at(y, x), &tc}}};
      for (const auto& [al, col] : stack) {
        for (int c = 0; c < 3; ++c) p[c] = (*col)[c] * al + (1.0 - al) * p[c];
        a = al + (1.0 - al) * a;
      }
      l.alpha.at(y, x) = static_cast<float>(a);
      for (int c = 0; c < 3; ++c) l.rgb.at(y, x, c) = static_cast<float>(p[c]);
    }
  return l;
}

Geometry geometry_of(const StyleVector& s, const SynthOptions& o) {
  const StyleValues& v = o.values;
  return {s[kItalic] ? o.italic_shear : 0.0, v.tilt[s[kTilt]],
          v.rotation_deg[s[kRotation]] * std::numbers::pi / 180.0, v.curve[s[kCurve]]};
}

Appearance appearance_of(const StyleVector& s, const SynthOptions& o) {
  const StyleValues& v = o.values;
  return {v.blur_sigma[s[kBlur]], v.alpha[s[kAlpha]], v.opacity[s[kOpacity]], s[kPoisson] == 1};
}

std::string pick_content(const std::vector<TextAnnotation>& ann, const SynthOptions& o,
                         std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kTagContent}));
  const bool from_ann = !ann.empty() && (o.words.empty() || rng.below(2) == 0);
  if (from_ann) return ann[rng.below(static_cast<int>(ann.size()))].content;
  if (o.words.empty()) throw InvalidArgument("synthesize: no annotation text and no word list");
  return o.words[rng.below(static_cast<int>(o.words.size()))];
}

void customize(SynthSample& out, const RasterImage& img, const std::vector<TextAnnotation>& ann,
               const std::vector<Rect>& blanks, const StyleVector& s, const SynthOptions& o) {
  const Resolved r = resolve_custom(s, o, out.fallback);
  const int px = static_cast<int>(o.values.size_px[s[kSize]]);
  out.content = pick_content(ann, o, s.seed);
  RasterImage glyph = render_text(out.content, r.font, px, r.spacing);
  if (glyph.empty()) throw PlacementError("text '" + out.content + "' has no visible glyphs");
  glyph = apply_geometry({glyph}, geometry_of(s, o))[0];
  Parts parts = build_parts(glyph, r);

  const Placement pl = place(img, blanks, parts.text.height(), parts.text.width(), px, s, o);
  const int lh = std::max(1, static_cast<int>(std::floor(parts.text.height() * pl.scale)));
  const int lw = std::max(1, static_cast<int>(std::floor(parts.text.width() * pl.scale)));
  parts = {resize_or_keep(parts.text, lh, lw), resize_or_keep(parts.border, lh, lw),
           resize_or_keep(parts.shadow, lh, lw)};
  const auto [x0, y0] = position(pl.blank, lh, lw, o.values.jitter[s[kJitter]], s.seed);
  out.placement = {x0, y0, x0 + lw, y0 + lh};

  const Color bg = region_mean(img, out.placement);
  const Color tc = text_color(r.color, bg, img, s.seed);
  static const std::array<Color, 2> kFixed{{{0, 0, 0}, {1, 1, 1}}};
  Color sc{0, 0, 0}, bc{0, 0, 0};
  if (r.shadow) {
    const int c = r.shadow_color;
    sc = c == 0 ? kFixed[0] : c == 1 ? Color{0.3, 0.3, 0.3} : c == 2 ? scaled(tc, 0.4) : scaled(bg, 0.5);
  }
  if (r.border) {
    const int c = r.border_color;
    bc = c < 2 ? kFixed[c] : c == 2 ? Color{1 - tc[0], 1 - tc[1], 1 - tc[2]} : scaled(tc, 0.5);
  }
  composite(out, img, colorize(parts, tc, bc, sc), x0, y0, appearance_of(s, o));
}

bool replicate(SynthSample& out, const RasterImage& img, const std::vector<TextAnnotation>& ann,
               const std::vector<Rect>& blanks, const StyleVector& s, const SynthOptions& o) {
  if (ann.empty()) return false;
  Rng rng(derive_seed(s.seed, {kTagSource}));
  const TextAnnotation& src = ann[rng.below(static_cast<int>(ann.size()))];
  const mser::Extraction ex = mser::extract_text_mask(img, src.bbox, o.mser);
  if (ex.failed) return false;
  const Rect mb = ex.mask.bounds();
  const RasterImage crop = img.crop(src.bbox).crop(mb);
  Layer layer{RasterImage(mb.height(), mb.width(), 3), RasterImage(mb.height(), mb.width(), 1)};
  for (int y = 0; y < mb.height(); ++y)
    for (int x = 0; x < mb.width(); ++x) {
      if (!ex.mask.at(y + mb.y0, x + mb.x0)) continue;
      layer.alpha.at(y, x) = 1.0f;
      for (int c = 0; c < 3; ++c) layer.rgb.at(y, x, c) = crop.at(y, x, c);
    }
  out.content = src.content;

  const double f = o.values.size_px[s[kSize]] / o.replicate_reference_px;
  layer = scale_crisp(layer, std::max(1, static_cast<int>(std::lround(mb.height() * f))),
                      std::max(1, static_cast<int>(std::lround(mb.width() * f))));
  const auto planes = apply_geometry({layer.rgb, layer.alpha}, geometry_of(s, o));
  layer = {planes[0], planes[1]};

  const Placement pl = place(img, blanks, layer.height(), layer.width(), layer.height(), s, o);
  const int lh = std::max(1, static_cast<int>(std::floor(layer.height() * pl.scale)));
  const int lw = std::max(1, static_cast<int>(std::floor(layer.width() * pl.scale)));
  layer = scale_crisp(layer, lh, lw);
  const auto [x0, y0] = position(pl.blank, lh, lw, o.values.jitter[s[kJitter]], s.seed);
  out.placement = {x0, y0, x0 + lw, y0 + lh};
  composite(out, img, layer, x0, y0, appearance_of(s, o));
  return true;
}

}  // namespace

void StyleValues::validate(const StyleSpace& space) const {
  const std::array<std::pair<int, const std::vector<double>*>, 11> tables{{
      {kSize, &size_px}, {kBlur, &blur_sigma}, {kAlpha, &alpha}, {kCurve, &curve},
      {kTilt, &tilt}, {kRotation, &rotation_deg}, {kShadowOffset, &shadow_offset},
      {kBorderWidth, &border_width}, {kLetterSpacing, &letter_spacing}, {kOpacity, &opacity},
      {kJitter, &jitter},
  }};
  for (const auto& [e, t] : tables)
    if (static_cast<int>(t->size()) != space.elements[e].choices)
      throw InvalidArgument("value table for " + space.elements[e].name + " has the wrong length");
  for (double v : size_px)
    if (v < 4 || v > 256) throw InvalidArgument("size values must be in [4,256]");
  for (double v : blur_sigma)
    if (v < 0) throw InvalidArgument("blur values must be >= 0");
  for (double v : alpha)
    if (v < 0 || v > 1) throw InvalidArgument("alpha values must be in [0,1]");
  for (double v : opacity)
    if (v <= 0 || v > 1) throw InvalidArgument("opacity values must be in (0,1]");
  for (double v : curve)
    if (v < 0 || v > 1) throw InvalidArgument("curve values must be in [0,1]");
  for (double v : tilt)
    if (v < 0 || v >= 0.9) throw InvalidArgument("tilt values must be in [0,0.9)");
  for (double v : rotation_deg)
    if (std::abs(v) > 45) throw InvalidArgument("rotation values must be within +-45 degrees");
  for (const auto* t : {&shadow_offset, &border_width, &letter_spacing, &jitter})
    for (double v : *t)
      if (v < 0 || v > 32 || v != std::floor(v))
        throw InvalidArgument("offset/width/spacing/jitter values must be integers in [0,32]");
}

Rect choose_blank(const RasterImage& img, int win_h, int win_w) {
  const int H = img.height(), W = img.width();
  if (win_h < 1 || win_w < 1 || win_h > H || win_w > W)
    throw PlacementError("blank window does not fit the image");
  const RasterImage e = sobel_magnitude(img);
  std::vector<double> sat(static_cast<std::size_t>(H + 1) * (W + 1), 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      sat[(y + 1) * (W + 1) + x + 1] = e.at(y, x) + sat[y * (W + 1) + x + 1] +
                                       sat[(y + 1) * (W + 1) + x] - sat[y * (W + 1) + x];
  // Keep a one-pixel ring when possible so the window stays off the border.
  const int m = (win_h + 2 <= H && win_w + 2 <= W) ? 1 : 0;
  double best = 1e300;
  Rect out;
  for (int y = m; y + win_h <= H - m; ++y)
    for (int x = m; x + win_w <= W - m; ++x) {
      const double v = sat[(y + win_h) * (W + 1) + x + win_w] - sat[y * (W + 1) + x + win_w] -
                       sat[(y + win_h) * (W + 1) + x] + sat[y * (W + 1) + x];
      if (v < best - 1e-9) {
        best = v;
        out = {x, y, x + win_w, y + win_h};
      }
    }
  return out;
}

SynthSample synthesize(const RasterImage& img, const std::vector<TextAnnotation>& annotations,
                       const std::vector<Rect>& blanks, const StyleVector& s, const SynthOptions& opts) {
  static const StyleSpace space = default_space();
  validate_style(space, s);
  opts.values.validate(space);
  if (img.channels() != 3) throw InvalidArgument("synthesize: expects an RGB image");
  for (const auto& a : annotations)
    if (a.bbox.empty() || !a.bbox.inside(img.width(), img.height()))
      throw InvalidArgument("synthesize: annotation bbox outside the image");
  for (const auto& b : blanks)
    if (b.empty() || !b.inside(img.width(), img.height()))
      throw InvalidArgument("synthesize: blank outside the image");

  SynthSample out;
  out.ground_truth = img;
  out.style = s;
  if (s[kMechanism] == kReplicate) {
    if (replicate(out, img, annotations, blanks, s, opts)) return out;
    out.fallback = true;
  }
  customize(out, img, annotations, blanks, s, opts);
  return out;
}

}  // namespace ste
