#include <benchmark/benchmark.h>

#include "ste/fixtures.hpp"
#include "ste/image_ops.hpp"
#include "ste/rng.hpp"
#include "ste/trainer.hpp"

using namespace ste;

namespace {

RasterImage noise(int h, int w, int c) {
  Rng rng(1);
  RasterImage img(h, w, c);
  for (auto& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

Exec mode(const benchmark::State& st) { return st.range(1) ? Exec::parallel : Exec::serial; }

void BM_blur(benchmark::State& st) {
  const RasterImage img = noise(st.range(0), st.range(0), 3);
  for (auto _ : st) benchmark::DoNotOptimize(gaussian_blur(img, 2.0, mode(st)));
}

void BM_dilate(benchmark::State& st) {
  Rng rng(2);
  BinaryMask m(st.range(0), st.range(0));
  for (auto& v : m.data()) v = rng.uniform() < 0.05;
  for (auto _ : st) benchmark::DoNotOptimize(dilate(m, 3, mode(st)));
}

void BM_poisson(benchmark::State& st) {
  const int n = st.range(0);
  const RasterImage src = noise(n, n, 3), dst = noise(n, n, 3);
  BinaryMask m(n, n);
  for (int y = n / 4; y < 3 * n / 4; ++y)
    for (int x = n / 4; x < 3 * n / 4; ++x) m.at(y, x) = 1;
  PoissonOptions o;
  o.exec = mode(st);
  for (auto _ : st) benchmark::DoNotOptimize(poisson_blend(src, dst, m, o));
}

// One alternating D/G step at batch 8, 64x64; synthesis and the graph ops
// follow the exec mode.
void BM_train_step(benchmark::State& st) {
  std::vector<train::TrainImage> imgs;
  for (int i = 0; i < 8; ++i) {
    const Fixture f = make_fixture(i, 64);
    imgs.push_back(train::make_train_image(f.image, f.texts, f.blanks));
  }
  io::RunConfig cfg;
  cfg.batch_size = 8;
  cfg.policy_enabled = false;
  cfg.total_steps = 1 << 30;
  train::TrainerOptions opt;
  opt.exec = mode(st);
  train::Trainer t(cfg, imgs, opt);
  for (auto _ : st) t.step();
}

}  // namespace

BENCHMARK(BM_blur)->ArgsProduct({{64, 256}, {0, 1}});
BENCHMARK(BM_dilate)->ArgsProduct({{64, 256}, {0, 1}});
BENCHMARK(BM_poisson)->ArgsProduct({{32, 64}, {0, 1}});
BENCHMARK(BM_train_step)->ArgsProduct({{64}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
