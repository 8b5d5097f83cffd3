#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "ste/fixtures.hpp"
#include "ste/io/manifest.hpp"
#include "ste/png_io.hpp"

using namespace ste;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result ste_run(std::vector<std::string> args) {
  args.insert(args.begin(), "ste");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "ste_test_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string fixtures(const fs::path& d, int n) {
  std::vector<io::ManifestRecord> recs;
  for (int i = 0; i < n; ++i) {
    const Fixture f = make_fixture(i);
    const std::string p = (d / ("f" + std::to_string(i) + ".png")).string();
    write_png(p, f.image);
    recs.push_back({p, f.texts, f.blanks});
  }
  const std::string m = (d / "manifest.jsonl").string();
  io::write_manifest(m, recs);
  return m;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(ste_run({}).code == cli::kExitInvalid);
  CHECK(ste_run({"frobnicate"}).code == cli::kExitInvalid);
  CHECK(ste_run({"eval", "--out", "x.csv"}).code == cli::kExitInvalid);
  CHECK(ste_run({"mser", "--image", "a.png", "--bbox", "1,2,3", "--out", "m.png"}).code == cli::kExitInvalid);
}

TEST_CASE("invalid input writes nothing") {
  const fs::path d = scratch("invalid");
  const std::string m = fixtures(d, 2);
  const fs::path out = d / "out";
  CHECK(ste_run({"synth", "--manifest", (d / "none.jsonl").string(), "--out", out.string(), "--n", "2", "--seed", "1"})
            .code == cli::kExitInvalid);
  CHECK(ste_run({"synth", "--manifest", m, "--out", out.string(), "--n", "2", "--seed", "1", "--set", "nope=1"}).code ==
        cli::kExitInvalid);
  std::ofstream(d / "bad.cfg") << "batch_size = -3\n";
  const Result r = ste_run({"train", "--manifest", m, "--config", (d / "bad.cfg").string(), "--out", out.string()});
  CHECK(r.code == cli::kExitInvalid);
  CHECK(r.err.find("line 1") != std::string::npos);
  CHECK(!fs::exists(out));
}

TEST_CASE("synth, mser and eval run") {
  const fs::path d = scratch("run");
  const std::string m = fixtures(d, 3);
  const Result s = ste_run({"synth", "--manifest", m, "--out", (d / "syn").string(), "--n", "3", "--seed", "4"});
  REQUIRE(s.code == cli::kExitOk);
  CHECK(s.out.find("config fingerprint") != std::string::npos);
  CHECK(fs::exists(d / "syn" / "resolved-config"));

  const Fixture f = make_fixture(0);
  const Rect b = f.texts[0].bbox;
  const std::string box = std::to_string(b.x0) + "," + std::to_string(b.y0) + "," + std::to_string(b.x1) + "," +
                          std::to_string(b.y1);
  REQUIRE(ste_run({"mser", "--image", (d / "f0.png").string(), "--bbox", box, "--out", (d / "m.png").string()}).code ==
          cli::kExitOk);
  const BinaryMask mask = read_mask_png((d / "m.png").string());
  CHECK(mask.height() == f.image.height());
  CHECK(mask.any());

  fs::create_directories(d / "pairs");
  write_png((d / "pairs" / "a_pred.png").string(), f.image);
  write_png((d / "pairs" / "a_gt.png").string(), f.image);
  REQUIRE(ste_run({"eval", "--pairs", (d / "pairs").string(), "--out", (d / "e.csv").string()}).code == cli::kExitOk);
  std::ifstream in(d / "e.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "id,psnr,ssim");
}
