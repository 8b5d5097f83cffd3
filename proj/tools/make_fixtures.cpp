// Writes procedural poster fixtures (PNG + manifest.jsonl) for smoke runs.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "ste/fixtures.hpp"
#include "ste/io/manifest.hpp"
#include "ste/png_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"procedural fixture set", "make_fixtures"};
  std::string out;
  int n = 50, size = 64;
  std::uint64_t seed = 0;
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--n", n, "image count")->check(CLI::Range(1, 1000000));
  app.add_option("--size", size, "side length, multiple of 8")->check(CLI::Range(32, 1024));
  app.add_option("--seed", seed, "first fixture seed");
  CLI11_PARSE(app, argc, argv);
  if (size % 8) {
    std::cerr << "error: --size must be a multiple of 8\n";
    return 2;
  }
  try {
    std::filesystem::create_directories(out);
    std::vector<ste::io::ManifestRecord> recs;
    for (int i = 0; i < n; ++i) {
      const ste::Fixture f = ste::make_fixture(seed + i, size);
      char name[32];
      std::snprintf(name, sizeof name, "fixture_%05d.png", i);
      ste::write_png((std::filesystem::path(out) / name).string(), f.image);
      recs.push_back({name, f.texts, f.blanks});
    }
    ste::io::write_manifest((std::filesystem::path(out) / "manifest.jsonl").string(), recs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
