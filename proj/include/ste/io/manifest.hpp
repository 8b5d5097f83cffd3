#pragma once

#include <string>
#include <vector>

#include "ste/synth.hpp"

namespace ste::io {

struct ManifestRecord {
  std::string image;  // resolved path (relative entries are taken from the manifest's directory)
  std::vector<TextAnnotation> texts;
  std::vector<Rect> blanks;
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

// One JSON object per line:
//   {"image": "a.png", "texts": [{"bbox": [x0,y0,x1,y1], "content": "..."}], "blanks": [[x0,y0,x1,y1]]}
// Blank lines are skipped. Errors are ParseError carrying the 1-based line.
// With check_images, every image is decoded and rectangles are bounds-checked.
std::vector<ManifestRecord> parse_manifest(const std::string& path, bool check_images = true);

// Writes records with image paths as given (callers pass paths relative to
// the manifest's directory).
void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

}  // namespace ste::io
