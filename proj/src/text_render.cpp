#include "ste/text_render.hpp"

#include <opencv2/core.hpp>
#include <opencv2/freetype.hpp>
#include <opencv2/imgproc.hpp>

#include <array>
#include <mutex>

namespace ste {

namespace {

const std::array<std::string, 6> kFonts = {
    "DejaVuSans.ttf",      "DejaVuSans-Bold.ttf", "DejaVuSerif.ttf",
    "DejaVuSerif-Bold.ttf", "DejaVuSansMono.ttf", "DejaVuSansMono-Bold.ttf",
};

// FreeType handles are not safe to share, so every use goes through this lock.
std::mutex g_font_mutex;
std::array<cv::Ptr<cv::freetype::FreeType2>, kFonts.size()> g_faces;

cv::freetype::FreeType2& face(int font) {
  auto& f = g_faces[font];
  if (!f) {
    f = cv::freetype::createFreeType2();
    const std::string path = std::string(STE_FONT_DIR) + "/" + kFonts[font];
    try {
      f->loadFontData(path, 0);
    } catch (const cv::Exception& e) {
      f.release();
      throw IoError("cannot load font " + path);
    }
  }
  return *f;
}

int text_width(cv::freetype::FreeType2& ft, const std::string& s, int px) {
  int base = 0;
  const cv::Size sz = ft.getTextSize(s, px, -1, &base);
  return std::max(0, sz.width);
}

}  // namespace

int font_count() { return static_cast<int>(kFonts.size()); }

const std::string& font_name(int font) {
  if (font < 0 || font >= font_count()) throw InvalidArgument("font index out of range");
  return kFonts[font];
}

RasterImage render_text(const std::string& text, int font, int px_height, int letter_spacing) {
  if (font < 0 || font >= font_count()) throw InvalidArgument("render_text: font index out of range");
  if (px_height < 4 || px_height > 512) throw InvalidArgument("render_text: px_height out of range");
  if (letter_spacing < 0) throw InvalidArgument("render_text: negative letter spacing");
  if (text.empty()) return {};

  const int pad = px_height;
  cv::Mat canvas;
  {
    std::lock_guard<std::mutex> lock(g_font_mutex);
    cv::freetype::FreeType2& ft = face(font);
    const int n = static_cast<int>(text.size());
    const int width = text_width(ft, text, px_height) + letter_spacing * n + 2 * pad;
    canvas = cv::Mat(px_height + 2 * pad, width, CV_8UC3, cv::Scalar::all(0));
    const cv::Point origin(pad, pad + px_height);
    if (letter_spacing == 0) {
      ft.putText(canvas, text, origin, px_height, cv::Scalar::all(255), -1, cv::LINE_AA, true);
    } else {
      // Pen position of glyph i: width of the prefix through i minus glyph i alone.
      for (int i = 0; i < n; ++i) {
        const std::string ch = text.substr(i, 1);
        if (ch == " ") continue;
        const int x = text_width(ft, text.substr(0, i + 1), px_height) - text_width(ft, ch, px_height);
        ft.putText(canvas, ch, {origin.x + x + i * letter_spacing, origin.y}, px_height,
                   cv::Scalar::all(255), -1, cv::LINE_AA, true);
      }
    }
  }

  int x0 = canvas.cols, y0 = canvas.rows, x1 = -1, y1 = -1;
  for (int y = 0; y < canvas.rows; ++y)
    for (int x = 0; x < canvas.cols; ++x)
      if (canvas.at<cv::Vec3b>(y, x)[0]) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return {};
  RasterImage out(y1 - y0 + 1, x1 - x0 + 1, 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      out.at(y - y0, x - x0) = static_cast<float>(canvas.at<cv::Vec3b>(y, x)[0] / 255.0);
  return out;
}

}  // namespace ste
