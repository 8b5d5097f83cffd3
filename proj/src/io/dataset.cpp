#include "ste/io/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "ste/png_io.hpp"

namespace ste::io {

namespace fs = std::filesystem;
using nlohmann::json;

void write_sample(const SynthSample& s, const StyleSpace& space, const std::string& out_dir, const std::string& id) {
  validate_style(space, s.style);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
  const fs::path base = fs::path(out_dir) / id;
  write_png(base.string() + "_syn.png", s.i_syn);
  write_png(base.string() + "_gt.png", s.ground_truth);
  write_mask_png(base.string() + "_mask.png", s.m_syn);

  json j;
  json names = json::array();
  for (const auto& e : space.elements) names.push_back(e.name);
  j["elements"] = names;
  j["choices"] = s.style.choices;
  j["active"] = hierarchy_mask(space, s.style);
  j["seed"] = s.style.seed;
  j["fallback"] = s.fallback;
  j["placement"] = {s.placement.x0, s.placement.y0, s.placement.x1, s.placement.y1};
  j["content"] = s.content;
  const std::string path = base.string() + "_style.json";
  std::ofstream out(path, std::ios::binary);
  out << j.dump(1) << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

SynthSample read_sample(const StyleSpace& space, const std::string& dir, const std::string& id) {
  const std::string base = (fs::path(dir) / id).string();
  SynthSample s;
  s.i_syn = read_png(base + "_syn.png");
  s.ground_truth = read_png(base + "_gt.png");
  s.m_syn = read_mask_png(base + "_mask.png");
  const std::string path = base + "_style.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
    s.style.choices = j.at("choices").get<std::vector<int>>();
    s.style.seed = j.at("seed").get<std::uint64_t>();
    s.fallback = j.at("fallback").get<bool>();
    const auto p = j.at("placement").get<std::vector<int>>();
    if (p.size() != 4) throw FormatError("placement must have 4 entries");
    s.placement = {p[0], p[1], p[2], p[3]};
    s.content = j.at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  validate_style(space, s.style);
  return s;
}

}  // namespace ste::io
