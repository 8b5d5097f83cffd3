#include <cmath>

#include "doctest.h"
#include "ste/model/adversary.hpp"
#include "ste/model/tensors.hpp"
#include "ste/nn/grad_check.hpp"

using namespace ste;
using namespace ste::model;
using nn::Tensor;

namespace {

Tensor<double> tens(const nn::Shape& s, std::initializer_list<double> v) {
  Tensor<double> t(s);
  t.data.assign(v.begin(), v.end());
  return t;
}

Tensor<double> rand_tensor(const nn::Shape& s, Rng& rng, double lo = 0, double hi = 1) {
  Tensor<double> t(s);
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

Tensor<double> rand_mask(const nn::Shape& s, Rng& rng, double p = 0.3) {
  Tensor<double> t(s);
  for (auto& v : t.data) v = rng.uniform() < p ? 1.0 : 0.0;
  return t;
}

double eval_tel(const Tensor<double>& ir, const Tensor<double>& ic, const Tensor<double>& gt, double gamma = 2) {
  Graph<double> g;
  return g.scalar(tel_loss(g, g.input(ir), g.input(ic), g.input(gt), gamma));
}

double eval_dice(const Tensor<double>& p, const Tensor<double>& t, double eps = kDiceEps) {
  Graph<double> g;
  return g.scalar(dice_loss(g, g.input(p), g.input(t), eps));
}

double l1_ref(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
  return s / a.size();
}

double dice_ref(const Tensor<double>& p, const Tensor<double>& t, double eps) {
  double i = 0, a = 0, b = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    i += p.data[k] * t.data[k];
    a += p.data[k];
    b += t.data[k];
  }
  return 1 - (2 * i + eps) / (a + b + eps);
}

}  // namespace

TEST_CASE("tel_loss values") {
  const auto gt = tens({1}, {0.0}), ic = tens({1}, {0.5}), ir = tens({1}, {0.1});
  CHECK(std::abs(eval_tel(ir, ic, gt) - 0.1 / (0.1 + 0.16)) <= 1e-6);
  CHECK(eval_tel(gt, ic, gt) == 0.0);
  CHECK(std::abs(eval_tel(ic, ic, gt) - 1.0) <= 1e-6);
  CHECK(eval_tel(gt, gt, gt) == 0.0);

  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto a = rand_tensor({6}, rng), b = rand_tensor({6}, rng), c = rand_tensor({6}, rng);
    const double v = eval_tel(a, b, c, 1 + rng.uniform() * 3);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // Pushing I_c further away with |I_r - I| fixed strictly lowers the loss.
  double prev = 2;
  for (double d : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    const double v = eval_tel(tens({1}, {0.3}), tens({1}, {0.3 + d}), tens({1}, {0.2}));
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("dice_loss values") {
  const auto t = tens({4}, {1, 1, 0, 0});
  CHECK(std::abs(eval_dice(t, t)) <= 1e-12);
  Tensor<double> big_a({400}), big_b({400});
  for (int i = 0; i < 200; ++i) big_a.data[i] = big_b.data[200 + i] = 1;
  CHECK(eval_dice(big_a, big_b) >= 0.99);
  CHECK(std::abs(eval_dice(tens({4}, {1, 1, 1, 1}), t, 0.0) - 1.0 / 3.0) <= 1e-6);
}

TEST_CASE("composite orientations") {
  Graph<double> g;
  const Var one = g.input(tens({1, 1, 1, 1}, {1})), zero = g.input(tens({1, 1, 1, 1}, {0}));
  CHECK(g.scalar(composite(g, one, zero, one, CompositeOrientation::as_printed)) == 1.0);
  CHECK(g.scalar(composite(g, one, zero, one, CompositeOrientation::complement)) == 0.0);

  Rng rng(6);
  RasterImage a(8, 8, 3), b(8, 8, 3);
  for (auto& v : a.data()) v = static_cast<float>(rng.uniform());
  for (auto& v : b.data()) v = static_cast<float>(rng.uniform());
  CHECK(composite(a, b, BinaryMask(8, 8, 1)) == a);
  CHECK(composite(a, b, BinaryMask(8, 8, 0)) == b);

  // Graph composite is exact where the mask is set (as printed).
  BinaryMask m(8, 8);
  for (auto& v : m.data()) v = rng.uniform() < 0.4;
  Graph<float> gf;
  const Var xs = gf.input(images_to_tensor<float>({&a})), xr = gf.input(images_to_tensor<float>({&b}));
  const Var m3 = gf.input(masks_to_tensor<float>({&m}, 3));
  const RasterImage out = tensor_to_image(gf.value(composite(gf, xs, xr, m3, CompositeOrientation::as_printed)), 0);
  CHECK(out == composite(a, b, m));
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      if (m.at(y, x))
        for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == a.at(y, x, c));
}

TEST_CASE("generator contract and determinism") {
  nn::ParamSet<float> a, b;
  init_generator(a, 5);
  init_generator(b, 5);
  CHECK(a.hash() == b.hash());
  RasterImage img(16, 24, 3, 0.4f);
  BinaryMask m(16, 24);
  m.at(3, 4) = 1;
  const ErasePass p = erase(a, img, m);
  const ErasePass q = erase(b, img, m, Exec::serial);
  CHECK(p.i_r.height() == 16);
  CHECK(p.i_r.width() == 24);
  CHECK(p.i_c.channels() == 3);
  CHECK(p.m_pred.channels() == 1);
  CHECK(p.i_r.valid());
  CHECK(p.m_pred.valid());
  CHECK(p.g_feat.shape == nn::Shape{1, 64, 2, 3});
  CHECK(p.i_r == q.i_r);
  CHECK(p.m_pred == q.m_pred);
  CHECK_THROWS_AS(erase(a, RasterImage(12, 16, 3), BinaryMask(12, 16)), InvalidArgument);
  CHECK_THROWS_AS(erase(a, img, BinaryMask(16, 16)), InvalidArgument);
}

TEST_CASE("total_loss equals the hand-summed weighted terms") {
  Rng rng(9);
  const nn::Shape s{2, 3, 8, 8};
  const auto ic = rand_tensor(s, rng), ir = rand_tensor(s, rng), gt = rand_tensor(s, rng),
             isyn = rand_tensor(s, rng);
  const auto m1 = rand_mask({2, 1, 8, 8}, rng), mp = rand_tensor({2, 1, 8, 8}, rng);
  Tensor<double> m3(s);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 64; ++k) m3.data[(n * 3 + c) * 64 + k] = m1.data[n * 64 + k];
  LossWeights w;
  w.adv = 0.3;
  w.rec = 1.5;
  w.mask = 0.7;
  w.tel = 2.0;
  w.coarse = 0.5;

  Graph<double> g;
  const EraseVars pass{g.input(ic), g.input(ir), g.input(mp), Var{}};
  const LossInputs in{g.input(isyn), g.input(m1), g.input(m3), g.input(gt), g.input(tens({1}, {0.8}))};
  const LossVars l = total_loss(g, pass, in, w, CompositeOrientation::complement);

  auto comp = [&](const Tensor<double>& r) {
    Tensor<double> o(s);
    for (std::size_t i = 0; i < o.size(); ++i) o.data[i] = m3.data[i] * r.data[i] + (1 - m3.data[i]) * isyn.data[i];
    return o;
  };
  const double rec = l1_ref(comp(ir), gt) + 0.5 * l1_ref(comp(ic), gt);
  const double tel = l1_ref(ir, gt) / (l1_ref(ir, gt) + std::pow(l1_ref(ir, ic), 2) + 1e-8);
  const double msk = dice_ref(mp, m1, 1.0);
  CHECK(std::abs(g.scalar(l.rec) - rec) <= 1e-9);
  CHECK(std::abs(g.scalar(l.tel) - tel) <= 1e-9);
  CHECK(std::abs(g.scalar(l.mask) - msk) <= 1e-9);
  CHECK(std::abs(g.scalar(l.total) - (0.3 * 0.8 + 1.5 * rec + 0.7 * msk + 2.0 * tel)) <= 1e-6);

  Graph<double> z;
  const EraseVars zp{z.input(gt), z.input(gt), z.input(m1), Var{}};
  // Outside the mask I_syn equals I, so a perfect prediction has zero loss.
  const LossInputs zi{z.input(gt), z.input(m1), z.input(m3), z.input(gt), Var{}};
  CHECK(z.scalar(total_loss(z, zp, zi, w, CompositeOrientation::complement).total) == doctest::Approx(0).epsilon(1e-12));
  LossWeights none{0, 0, 0, 0, 0, 0, 2, 0};
  CHECK(z.scalar(total_loss(z, zp, zi, none, CompositeOrientation::complement).total) == 0.0);
  LossWeights bad;
  bad.perc = 1;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("lsgan, d_text and r_real values") {
  Graph<double> g;
  auto L = [&](double r, double f) {
    return lsgan_losses(g, g.input(tens({1, 1, 2, 2}, {r, r, r, r})), g.input(tens({1, 1, 2, 2}, {f, f, f, f})));
  };
  CHECK(g.scalar(L(1, 0).d_loss) == 0.0);
  CHECK(g.scalar(L(0.3, 1).g_loss) == 0.0);
  CHECK(std::abs(g.scalar(L(0.5, 0.5).d_loss) - 0.25) <= 1e-12);
  CHECK(std::abs(g.scalar(L(0.5, 0.5).g_loss) - 0.125) <= 1e-12);

  // Directional derivatives: moving scores toward (1, 0) lowers d_loss, toward 1 lowers g_loss.
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double r = rng.uniform(-1, 2), f = rng.uniform(-1, 2), h = 1e-4;
    const double dr = (r < 1 ? h : -h), df = (f > 0 ? -h : h);
    if (std::abs(r - 1) > 2 * h && std::abs(f) > 2 * h) CHECK(g.scalar(L(r + dr, f + df).d_loss) < g.scalar(L(r, f).d_loss));
    const double dg = (f < 1 ? h : -h);
    if (std::abs(f - 1) > 2 * h) CHECK(g.scalar(L(r, f + dg).g_loss) < g.scalar(L(r, f).g_loss));
  }

  Tensor<double> orig({1, 1, 4, 4}), syn({1, 1, 4, 4});
  for (int k = 0; k < 4; ++k) orig.data[k] = 1;
  for (int k = 8; k < 12; ++k) syn.data[k] = 1;
  auto dtl = [&](const Tensor<double>& map) { return g.scalar(d_text_loss(g, g.input(map), g.input(orig))); };
  CHECK(dtl(orig) <= 1e-6 + 0.0);
  CHECK(dtl(syn) == doctest::Approx(1 - 1.0 / 9.0));
  Tensor<double> half({1, 1, 4, 4}, 0.5);
  CHECK(std::abs(dtl(half) - (1 - (4.0 + 1) / (8 + 4 + 1))) <= 1e-6);

  CHECK(r_real(syn, syn) == doctest::Approx(0).epsilon(1e-12));
  CHECK(std::abs(r_real(Tensor<double>({1, 1, 4, 4}), syn) - -(1 - 1.0 / 5.0)) <= 1e-6);
  Tensor<double> hs = syn;
  for (auto& v : hs.data) v *= 0.5;
  CHECK(std::abs(r_real(hs, syn) - -(1 - (4.0 + 1) / (6.0 + 1))) <= 1e-6);
  for (int i = 0; i < 100; ++i) {
    const auto tm = rand_tensor({1, 1, 4, 4}, rng), sm = rand_mask({1, 1, 4, 4}, rng);
    const double r = r_real(tm, sm);
    CHECK(r <= 0.0);
    CHECK(r >= -1.0);
  }
}

TEST_CASE("discriminator shapes") {
  nn::ParamSet<float> d;
  init_discriminator(d, 1);
  Graph<float> g;
  const Var s = d_patch(g, d, g.input(Tensor<float>({2, 3, 16, 24}, 0.5f)));
  CHECK(g.value(s).shape == nn::Shape{2, 1, 2, 3});
  const Var t = d_text(g, d, g.input(Tensor<float>({2, 64, 2, 3}, 0.1f)));
  CHECK(g.value(t).shape == nn::Shape{2, 1, 16, 24});
  for (float v : g.value(t).data) CHECK((v >= 0 && v <= 1));
  CHECK_THROWS_AS(d_patch(g, d, g.input(Tensor<float>({1, 3, 12, 16}))), InvalidArgument);
}

TEST_CASE("TEL alone passes grad_check") {
  Rng rng(17);
  nn::ParamSet<double> ps;
  ps.add("ir", {1, 3, 4, 4}).value = rand_tensor({1, 3, 4, 4}, rng);
  ps.add("ic", {1, 3, 4, 4}).value = rand_tensor({1, 3, 4, 4}, rng);
  const auto gt = rand_tensor({1, 3, 4, 4}, rng);
  const auto r = nn::grad_check<double>(ps, [&](Graph<double>& g) {
    return tel_loss(g, g.param(ps.get("ir")), g.param(ps.get("ic")), g.input(gt), 2.0);
  });
  CAPTURE(r.worst);
  CHECK(r.max_rel_error <= 1e-3);
}

TEST_CASE("generator + discriminator total loss passes grad_check") {
  Rng rng(23);
  nn::ParamSet<double> ps;
  init_generator(ps, 3);
  init_discriminator(ps, 4);
  const nn::Shape s{1, 3, 16, 16};
  const auto isyn = rand_tensor(s, rng), gt = rand_tensor(s, rng);
  const auto m1 = rand_mask({1, 1, 16, 16}, rng);
  Tensor<double> m3(s);
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 256; ++k) m3.data[c * 256 + k] = m1.data[k];
  const LossWeights w;
  nn::GradCheckOptions opt;
  opt.stride = 7;
  const auto r = nn::grad_check<double>(ps, [&](Graph<double>& g) {
    const Var x = g.input(isyn), m = g.input(m1), mm = g.input(m3);
    const EraseVars pass = generator_forward(g, ps, x, m);
    const Var pred = composite(g, x, pass.i_r, mm, CompositeOrientation::complement);
    const Var adv = lsgan_losses(g, Var{}, d_patch(g, ps, pred)).g_loss;
    const LossVars l = total_loss(g, pass, {x, m, mm, g.input(gt), adv}, w, CompositeOrientation::complement);
    const Var dt = d_text_loss(g, d_text(g, ps, pass.g_feat), m);
    return g.add(l.total, dt);
  }, opt);
  CAPTURE(r.worst);
  CAPTURE(r.checked);
  CHECK(r.checked > 10000 / 7);
  CHECK(r.max_rel_error <= 1e-3);
}
