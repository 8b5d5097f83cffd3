#include "ste/model/erase.hpp"

#include <cmath>

#include "ste/model/tensors.hpp"
#include "ste/rng.hpp"

namespace ste::model {

CompositeOrientation parse_orientation(const std::string& s) {
  if (s == "as-printed") return CompositeOrientation::as_printed;
  if (s == "complement") return CompositeOrientation::complement;
  throw InvalidArgument("composite orientation must be as-printed or complement, got '" + s + "'");
}

std::string to_string(CompositeOrientation o) {
  return o == CompositeOrientation::as_printed ? "as-printed" : "complement";
}

void LossWeights::validate() const {
  for (double v : {adv, rec, mask, tel, coarse})
    if (!(v >= 0) || !std::isfinite(v)) throw InvalidArgument("loss weights must be finite and >= 0");
  if (perc != 0 || sty != 0) throw InvalidArgument("perceptual and style weights are not supported (must be 0)");
  if (!(gamma >= 1) || !std::isfinite(gamma)) throw InvalidArgument("TEL gamma must be >= 1");
}

namespace {

template <class Real>
void add_conv(ParamSet<Real>& ps, const std::string& name, int co, int ci, int k, Rng& rng) {
  nn::Param<Real>& w = ps.add(name + ".w", {co, ci, k, k});
  nn::init_kaiming(w.value, ci * k * k, rng);
  ps.add(name + ".b", {co});
}

template <class Real>
void add_stage(ParamSet<Real>& ps, const std::string& p, int cin, Rng& rng) {
  add_conv(ps, p + ".e1", 16, cin, 3, rng);
  add_conv(ps, p + ".e2", 32, 16, 3, rng);
  add_conv(ps, p + ".e3", 64, 32, 3, rng);
  add_conv(ps, p + ".d1", 32, 64, 3, rng);
  add_conv(ps, p + ".d2", 16, 32, 3, rng);
  add_conv(ps, p + ".out", 3, 16 + cin, 3, rng);
}

struct StageVars {
  Var out, bottleneck, feat;
};

template <class Real>
StageVars run_stage(Graph<Real>& g, ParamSet<Real>& ps, const std::string& p, Var x) {
  auto conv = [&](const char* n, Var in, int stride) {
    return g.conv2d(in, g.param(ps.get(p + n + ".w")), g.param(ps.get(p + n + ".b")), stride);
  };
  const Var e1 = g.leaky_relu(conv(".e1", x, 2));
  const Var e2 = g.leaky_relu(conv(".e2", e1, 2));
  const Var e3 = g.leaky_relu(conv(".e3", e2, 2));
  const Var d1 = g.leaky_relu(conv(".d1", g.upsample_nearest(e3, 2), 1));
  const Var d2 = g.leaky_relu(conv(".d2", g.upsample_nearest(d1, 2), 1));
  const Var feat = g.upsample_nearest(d2, 2);
  // The output conv also sees the stage input at full resolution.
  const Var out = g.sigmoid(conv(".out", g.concat(feat, x), 1));
  return {out, e3, feat};
}

}  // namespace

template <class Real>
void init_generator(ParamSet<Real>& ps, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x67656eULL}));
  add_stage(ps, "coarse", 4, rng);
  add_stage(ps, "refine", 6, rng);
  add_conv(ps, "refine.mask", 1, 16, 1, rng);
}

template <class Real>
EraseVars generator_forward(Graph<Real>& g, ParamSet<Real>& ps, Var i_syn, Var m_syn) {
  const auto& xs = g.value(i_syn);
  const auto& ms = g.value(m_syn);
  if (xs.rank() != 4 || xs.dim(1) != 3) throw InvalidArgument("generator: i_syn must be [N,3,H,W]");
  if (ms.rank() != 4 || ms.dim(1) != 1 || ms.dim(0) != xs.dim(0) || ms.dim(2) != xs.dim(2) ||
      ms.dim(3) != xs.dim(3))
    throw InvalidArgument("generator: m_syn must be [N,1,H,W] matching i_syn");
  if (xs.dim(2) % 8 || xs.dim(3) % 8) throw InvalidArgument("generator: H and W must be multiples of 8");

  const StageVars c = run_stage(g, ps, "coarse", g.concat(i_syn, m_syn));
  const StageVars r = run_stage(g, ps, "refine", g.concat(i_syn, c.out));
  const Var m = g.sigmoid(g.conv2d(r.feat, g.param(ps.get("refine.mask.w")), g.param(ps.get("refine.mask.b")), 1));
  return {c.out, r.out, m, r.bottleneck};
}

template <class Real>
Var composite(Graph<Real>& g, Var i_syn, Var i_r, Var m3, CompositeOrientation o) {
  const Var inv = g.affine(m3, -1.0, 1.0);
  if (o == CompositeOrientation::as_printed) return g.add(g.mul(m3, i_syn), g.mul(inv, i_r));
  return g.add(g.mul(m3, i_r), g.mul(inv, i_syn));
}

template <class Real>
Var tel_loss(Graph<Real>& g, Var i_r, Var i_c, Var gt, double gamma) {
  const Var num = g.l1(i_r, gt);
  const Var push = g.pow(g.l1(i_r, i_c), gamma);
  return g.div(num, g.affine(g.add(num, push), 1.0, kTelEps));
}

template <class Real>
Var dice_loss(Graph<Real>& g, Var pred, Var target, double eps) {
  const Var inter = g.sum(g.mul(pred, target));
  const Var denom = g.affine(g.add(g.sum(pred), g.sum(target)), 1.0, eps);
  return g.affine(g.div(g.affine(inter, 2.0, eps), denom), -1.0, 1.0);
}

template <class Real>
LossVars total_loss(Graph<Real>& g, const EraseVars& pass, const LossInputs& in, const LossWeights& w,
                    CompositeOrientation o) {
  w.validate();
  LossVars l;
  const Var pred = composite(g, in.i_syn, pass.i_r, in.m3, o);
  const Var coarse = composite(g, in.i_syn, pass.i_c, in.m3, o);
  l.rec = g.add(g.l1(pred, in.gt), g.affine(g.l1(coarse, in.gt), w.coarse, 0.0));
  l.mask = dice_loss(g, pass.m_pred, in.m_syn);
  l.tel = tel_loss(g, pass.i_r, pass.i_c, in.gt, w.gamma);
  l.adv = in.adv.valid() ? in.adv : g.input(nn::Tensor<Real>({1}));
  Var t = g.affine(l.rec, w.rec, 0.0);
  t = g.add(t, g.affine(l.adv, w.adv, 0.0));
  t = g.add(t, g.affine(l.mask, w.mask, 0.0));
  t = g.add(t, g.affine(l.tel, w.tel, 0.0));
  l.total = t;
  return l;
}

ErasePass erase(ParamSet<float>& gen, const RasterImage& i_syn, const BinaryMask& m_syn, Exec exec) {
  if (i_syn.channels() != 3 || !m_syn.same_shape(i_syn))
    throw InvalidArgument("erase: expects an RGB image and a mask of the same size");
  Graph<float> g(exec);
  const Var x = g.input(images_to_tensor<float>({&i_syn}));
  const Var m = g.input(masks_to_tensor<float>({&m_syn}));
  const EraseVars v = generator_forward(g, gen, x, m);
  return {tensor_to_image(g.value(v.i_c), 0), tensor_to_image(g.value(v.i_r), 0),
          tensor_to_image(g.value(v.m_pred), 0), g.value(v.g_feat)};
}

RasterImage composite(const RasterImage& i_syn, const RasterImage& i_r, const BinaryMask& m,
                      CompositeOrientation o) {
  if (!i_syn.same_shape(i_r) || !m.same_shape(i_syn)) throw InvalidArgument("composite: shape mismatch");
  RasterImage out(i_syn.height(), i_syn.width(), i_syn.channels());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const bool keep_syn = (m.at(y, x) != 0) == (o == CompositeOrientation::as_printed);
      for (int c = 0; c < out.channels(); ++c) out.at(y, x, c) = keep_syn ? i_syn.at(y, x, c) : i_r.at(y, x, c);
    }
  return out;
}

#define STE_INST(R)                                                                                  \
  template void init_generator<R>(ParamSet<R>&, std::uint64_t);                                      \
  template EraseVars generator_forward<R>(Graph<R>&, ParamSet<R>&, Var, Var);                        \
  template Var composite<R>(Graph<R>&, Var, Var, Var, CompositeOrientation);                         \
  template Var tel_loss<R>(Graph<R>&, Var, Var, Var, double);                                        \
  template Var dice_loss<R>(Graph<R>&, Var, Var, double);                                            \
  template LossVars total_loss<R>(Graph<R>&, const EraseVars&, const LossInputs&, const LossWeights&, \
                                  CompositeOrientation);
STE_INST(float)
STE_INST(double)
#undef STE_INST

}  // namespace ste::model
