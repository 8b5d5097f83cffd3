#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ste/fixtures.hpp"
#include "ste/metrics.hpp"
#include "ste/png_io.hpp"
#include "ste/trainer.hpp"

using namespace ste;
using namespace ste::train;
namespace fs = std::filesystem;

namespace {

std::vector<TrainImage> fixture_set(int n, int size, std::uint64_t base = 0) {
  std::vector<TrainImage> out;
  for (int i = 0; i < n; ++i) {
    const Fixture f = make_fixture(base + i, size);
    out.push_back(make_train_image(f.image, f.texts, f.blanks));
  }
  return out;
}

io::RunConfig small_config() {
  io::RunConfig c;
  c.image_size = 32;
  c.batch_size = 4;
  c.total_steps = 6;
  c.eval_every = 3;
  c.policy_warmup = 2;
  c.policy_cadence = 2;
  c.reward_batch = 6;
  c.seed = 5;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ste_test_trainer_" + name);
  fs::remove_all(p);
  return p;
}

RasterImage noise(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  RasterImage img(h, w, 3);
  for (auto& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

}  // namespace

TEST_CASE("psnr examples") {
  const RasterImage a(8, 8, 3, 0.25f);
  CHECK(psnr(a, a) == kPsnrCap);
  // Every channel off by 0.1 gives MSE 0.01.
  RasterImage b(8, 8, 3, 0.35f);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));
  CHECK(psnr(RasterImage(4, 4, 3, 0.0f), RasterImage(4, 4, 3, 1.0f)) == doctest::Approx(0.0));
  CHECK_THROWS_AS(psnr(a, RasterImage(8, 9, 3)), InvalidArgument);
}

TEST_CASE("ssim examples") {
  const RasterImage a = noise(16, 20, 1), b = noise(16, 20, 2);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
  CHECK(ssim(a, b) < 0.5);
  const double c1 = 0.01 * 0.01;
  CHECK(ssim(RasterImage(9, 9, 3, 0.0f), RasterImage(9, 9, 3, 1.0f)) == doctest::Approx(c1 / (1 + c1)).epsilon(1e-9));
  CHECK_THROWS_AS(ssim(RasterImage(6, 9, 3), RasterImage(6, 9, 3)), InvalidArgument);

  // Independent straightforward evaluation on one window of a 7x7 pair.
  const RasterImage x = noise(7, 7, 3), y = noise(7, 7, 4);
  double w[7][7], tot = 0;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) tot += w[i][j] = std::exp(-((i - 3) * (i - 3) + (j - 3) * (j - 3)) / 4.5);
  auto lum = [](const RasterImage& im, int i, int j) {
    return 0.299 * im.at(i, j, 0) + 0.587 * im.at(i, j, 1) + 0.114 * im.at(i, j, 2);
  };
  double mx = 0, my = 0;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) {
      mx += w[i][j] / tot * lum(x, i, j);
      my += w[i][j] / tot * lum(y, i, j);
    }
  double vx = 0, vy = 0, cv = 0;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) {
      vx += w[i][j] / tot * (lum(x, i, j) - mx) * (lum(x, i, j) - mx);
      vy += w[i][j] / tot * (lum(y, i, j) - my) * (lum(y, i, j) - my);
      cv += w[i][j] / tot * (lum(x, i, j) - mx) * (lum(y, i, j) - my);
    }
  const double c2 = 0.03 * 0.03;
  const double expect = (2 * mx * my + c1) * (2 * cv + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  CHECK(ssim(x, y) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("evaluate pairs directory") {
  const fs::path d = scratch("pairs");
  CHECK_THROWS_AS(evaluate(d.string()), InvalidArgument);
  fs::create_directories(d);
  CHECK_THROWS_AS(evaluate(d.string()), InvalidArgument);

  const RasterImage gt = quantize_image(noise(12, 12, 9));
  write_png((d / "a_pred.png").string(), gt);
  write_png((d / "a_gt.png").string(), gt);
  // Known MSE: every value shifted by 51/255 = 0.2 -> MSE 0.04 -> 13.979 dB.
  RasterImage flat(12, 12, 3, 0.2f), shifted(12, 12, 3, 0.4f);
  write_png((d / "b_pred.png").string(), shifted);
  write_png((d / "b_gt.png").string(), flat);
  const EvalReport r = evaluate(d.string());
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].psnr == kPsnrCap);
  CHECK(r.rows[0].ssim == doctest::Approx(1.0));
  CHECK(r.rows[1].psnr == doctest::Approx(10 * std::log10(1 / 0.04)).epsilon(1e-4));
  CHECK(r.mean_psnr == doctest::Approx((kPsnrCap + r.rows[1].psnr) / 2));
  write_eval_csv(r, (d / "report.csv").string());
  CHECK(slurp(d / "report.csv").find("FID,not computed") != std::string::npos);

  write_png((d / "c_pred.png").string(), gt);
  try {
    evaluate(d.string());
    FAIL("expected an unmatched-id error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("c") != std::string::npos);
  }
}

TEST_CASE("schedule bookkeeping") {
  io::RunConfig c = small_config();
  c.policy_cadence = 150;
  c.policy_warmup = 0;
  Trainer t(c, fixture_set(3, 32));
  for (int s : {150, 300, 450}) CHECK(t.phase_due(s));
  for (int s : {1, 149, 151, 299}) CHECK(!t.phase_due(s));
  c.policy_enabled = false;
  Trainer u(c, fixture_set(3, 32));
  CHECK(!u.phase_due(150));
  CHECK(!u.make_batch(10).policy_sampled);
  CHECK_THROWS_AS(Trainer(c, {}), InvalidArgument);
  CHECK_THROWS_AS(Trainer(c, fixture_set(1, 64)), InvalidArgument);
}

TEST_CASE("policy phase leaves the erasing model untouched") {
  Trainer t(small_config(), fixture_set(4, 32));
  t.step();
  t.step();
  const auto hg = t.generator().hash(), hd = t.discriminator().hash(), hp = t.policy().hash();
  const PhaseRecord p = t.policy_phase();
  CHECK(!p.skipped);
  CHECK(p.samples == 6);
  CHECK(p.mean_r_real <= 0);
  CHECK(p.mean_r_diff <= 0);
  CHECK(t.generator().hash() == hg);
  CHECK(t.discriminator().hash() == hd);
  CHECK(t.policy().hash() != hp);

  // A train step touches G and D but never the policy.
  const auto hp2 = t.policy().hash();
  io::RunConfig c = small_config();
  c.policy_enabled = false;
  Trainer u(c, fixture_set(4, 32));
  const auto up = u.policy().hash(), ug = u.generator().hash(), ud = u.discriminator().hash();
  u.step();
  CHECK(u.policy().hash() == up);
  CHECK(u.generator().hash() != ug);
  CHECK(u.discriminator().hash() != ud);
  CHECK(t.policy().hash() == hp2);
}

TEST_CASE("a failing reward skips the phase and training continues") {
  TrainerOptions opt;
  opt.reward_override = [](const StyleVector&) -> double { throw NumericError("bad reward"); };
  Trainer t(small_config(), fixture_set(4, 32), opt);
  const auto hp = t.policy().hash();
  t.step();
  t.step();
  REQUIRE(t.phases().size() == 1);
  CHECK(t.phases()[0].skipped);
  CHECK(t.phases()[0].reason == "bad reward");
  CHECK(t.policy().hash() == hp);
  CHECK(t.step().step == 3);
}

TEST_CASE("identical seeds give identical runs; resume continues the same trajectory") {
  const auto imgs = fixture_set(5, 32);
  const auto eval = make_eval_set(imgs, 4, 1, default_space(), {});
  auto run = [&](const fs::path& dir) {
    TrainerOptions opt;
    opt.out_dir = dir.string();
    opt.eval_set = eval;
    Trainer t(small_config(), imgs, opt);
    t.run();
  };
  const fs::path a = scratch("run_a"), b = scratch("run_b"), r = scratch("run_r");
  run(a);
  run(b);
  for (const char* f : {"loss.csv", "policy.csv", "eval.csv", "checkpoint.stew", "resolved-config"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const std::string pol = slurp(a / "policy.csv");
  CHECK(std::count(pol.begin(), pol.end(), '\n') == 1 + 3);

  // Interrupted at step 3 (the first checkpoint), then resumed.
  {
    TrainerOptions opt;
    opt.out_dir = r.string();
    opt.eval_set = eval;
    io::RunConfig c = small_config();
    c.total_steps = 3;
    Trainer t(c, imgs, opt);
    t.run();
    t.step();  // work lost in the crash
  }
  {
    TrainerOptions opt;
    opt.out_dir = r.string();
    opt.eval_set = eval;
    Trainer t(small_config(), imgs, opt);
    t.restore(io::load_checkpoint((r / "checkpoint.stew").string()));
    CHECK(t.steps_done() == 3);
    t.run();
  }
  CHECK(slurp(r / "checkpoint.stew") == slurp(a / "checkpoint.stew"));
  for (const char* f : {"loss.csv", "policy.csv", "eval.csv"}) {
    CAPTURE(f);
    CHECK(slurp(r / f) == slurp(a / f));
  }

  io::RunConfig other = small_config();
  other.loss.tel = 1;
  Trainer t(other, imgs);
  CHECK_THROWS_AS(t.restore(io::load_checkpoint((a / "checkpoint.stew").string())), InvalidArgument);
  io::RunConfig longer = small_config();
  longer.total_steps = 9;
  Trainer l(longer, imgs);
  l.restore(io::load_checkpoint((a / "checkpoint.stew").string()));
  CHECK(l.steps_done() == 6);
}

TEST_CASE("pure reconstruction training lowers the loss") {
  io::RunConfig c = small_config();
  c.loss.adv = c.loss.mask = c.loss.tel = 0;
  c.policy_enabled = false;
  c.batch_size = 8;
  c.lr_generator = 1e-3;
  Trainer t(c, fixture_set(10, 32, 40));
  double first = 0, last = 0;
  for (int s = 1; s <= 200; ++s) {
    const StepRecord r = t.step();
    if (s <= 20) first += r.rec;
    if (s > 180) last += r.rec;
  }
  CHECK(last < 0.7 * first);
}

TEST_CASE("choice statistics") {
  const StyleSpace sp = default_space();
  nn::ParamSet<float> pol;
  policy::init_policy(pol, sp, 3);
  const auto imgs = fixture_set(4, 32);
  std::vector<policy::PolicyState> states;
  for (const auto& im : imgs) states.push_back(im.state);
  const ChoiceStats st = choice_stats(pol, sp, states, 250, 9);
  const auto prop = st.proportions();
  for (int n = 0; n < sp.size(); ++n) {
    if (st.active[n] == 0) continue;
    double s = 0;
    for (double p : prop[n]) s += p;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(st.active[kMechanism] == 1000);
  // Untrained policy is uniform (zero heads).
  CHECK(st.uniform_p_value(kSize) > 1e-4);
  ChoiceStats skew = st;
  skew.counts[kSize].assign(sp.elements[kSize].choices, 0);
  skew.counts[kSize][0] = skew.active[kSize];
  CHECK(skew.uniform_p_value(kSize) < 1e-10);

  const fs::path d = scratch("stats");
  fs::create_directories(d);
  write_choice_stats(st, sp, (d / "hist.csv").string());
  const std::string csv = slurp(d / "hist.csv");
  CHECK(csv.rfind("element,active,choice0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + sp.size());
}
