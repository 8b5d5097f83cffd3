#include "ste/io/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "ste/png_io.hpp"

namespace ste::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Rect parse_rect(const json& j, const std::string& field, int line) {
  if (!j.is_array() || j.size() != 4)
    throw ParseError("line " + std::to_string(line) + ": field '" + field + "' must be [x0,y0,x1,y1]", line);
  int v[4];
  for (int i = 0; i < 4; ++i) {
    if (!j[i].is_number_integer())
      throw ParseError("line " + std::to_string(line) + ": field '" + field + "' must hold integers", line);
    v[i] = j[i].get<int>();
  }
  const Rect r{v[0], v[1], v[2], v[3]};
  if (r.x0 > r.x1 || r.y0 > r.y1)
    throw ParseError("line " + std::to_string(line) + ": field '" + field + "' has x0 > x1 or y0 > y1", line);
  if (r.empty()) throw ParseError("line " + std::to_string(line) + ": field '" + field + "' is empty", line);
  return r;
}

}  // namespace

std::vector<ManifestRecord> parse_manifest(const std::string& path, bool check_images) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  const fs::path dir = fs::path(path).parent_path();
  std::vector<ManifestRecord> out;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line) + ": ";
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(where + "malformed JSON (" + e.what() + ")", line);
    }
    if (!j.is_object()) throw ParseError(where + "record must be a JSON object", line);
    for (const auto& [k, v] : j.items())
      if (k != "image" && k != "texts" && k != "blanks") throw ParseError(where + "unknown field '" + k + "'", line);
    if (!j.contains("image") || !j["image"].is_string())
      throw ParseError(where + "field 'image' missing or not a string", line);
    ManifestRecord r;
    const fs::path img = j["image"].get<std::string>();
    r.image = (img.is_absolute() ? img : dir / img).lexically_normal().string();
    if (!j.contains("texts") || !j["texts"].is_array())
      throw ParseError(where + "field 'texts' missing or not an array", line);
    for (const auto& t : j["texts"]) {
      if (!t.is_object() || !t.contains("bbox") || !t.contains("content") || !t["content"].is_string())
        throw ParseError(where + "field 'texts' entries need 'bbox' and string 'content'", line);
      TextAnnotation a{parse_rect(t["bbox"], "bbox", line), t["content"].get<std::string>()};
      if (a.content.empty()) throw ParseError(where + "field 'content' is empty", line);
      r.texts.push_back(std::move(a));
    }
    if (j.contains("blanks")) {
      if (!j["blanks"].is_array()) throw ParseError(where + "field 'blanks' must be an array", line);
      for (const auto& b : j["blanks"]) r.blanks.push_back(parse_rect(b, "blanks", line));
    }
    if (check_images) {
      RasterImage im;
      try {
        im = read_png(r.image);
      } catch (const std::exception& e) {
        throw ParseError(where + "field 'image': " + e.what(), line);
      }
      for (const auto& t : r.texts)
        if (!t.bbox.inside(im.width(), im.height()))
          throw ParseError(where + "field 'bbox' lies outside the image", line);
      for (const auto& b : r.blanks)
        if (!b.inside(im.width(), im.height()))
          throw ParseError(where + "field 'blanks' lies outside the image", line);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  auto rect = [](const Rect& r) { return json::array({r.x0, r.y0, r.x1, r.y1}); };
  for (const auto& r : records) {
    json j;
    j["image"] = r.image;
    j["texts"] = json::array();
    for (const auto& t : r.texts) j["texts"].push_back({{"bbox", rect(t.bbox)}, {"content", t.content}});
    j["blanks"] = json::array();
    for (const auto& b : r.blanks) j["blanks"].push_back(rect(b));
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("failed writing manifest '" + path + "'");
}

}  // namespace ste::io
