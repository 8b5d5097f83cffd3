#include "ste/model/adversary.hpp"

#include "ste/rng.hpp"

namespace ste::model {

namespace {

template <class Real>
void add_conv(ParamSet<Real>& ps, const std::string& name, int co, int ci, int k, Rng& rng) {
  nn::init_kaiming(ps.add(name + ".w", {co, ci, k, k}).value, ci * k * k, rng);
  ps.add(name + ".b", {co});
}

template <class Real>
Var conv(Graph<Real>& g, ParamSet<Real>& ps, const std::string& n, Var x, int stride) {
  return g.conv2d(x, g.param(ps.get(n + ".w")), g.param(ps.get(n + ".b")), stride);
}

}  // namespace

template <class Real>
void init_discriminator(ParamSet<Real>& ps, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x646973ULL}));
  add_conv(ps, "d.c1", 16, 3, 3, rng);
  add_conv(ps, "d.c2", 32, 16, 3, rng);
  add_conv(ps, "d.c3", 64, 32, 3, rng);
  add_conv(ps, "d.score", 1, 64, 1, rng);
  add_conv(ps, "dt.c1", 32, 64, 3, rng);
  add_conv(ps, "dt.c2", 1, 32, 3, rng);
}

template <class Real>
Var d_patch(Graph<Real>& g, ParamSet<Real>& ps, Var image) {
  const auto& v = g.value(image);
  if (v.rank() != 4 || v.dim(1) != 3 || v.dim(2) % 8 || v.dim(3) % 8)
    throw InvalidArgument("d_patch: expects [N,3,H,W] with H, W multiples of 8");
  Var h = g.leaky_relu(conv(g, ps, "d.c1", image, 2));
  h = g.leaky_relu(conv(g, ps, "d.c2", h, 2));
  h = g.leaky_relu(conv(g, ps, "d.c3", h, 2));
  return conv(g, ps, "d.score", h, 1);
}

template <class Real>
Var d_text(Graph<Real>& g, ParamSet<Real>& ps, Var g_feat) {
  const auto& v = g.value(g_feat);
  if (v.rank() != 4 || v.dim(1) != 64) throw InvalidArgument("d_text: expects a [N,64,h,w] feature map");
  const Var h = g.leaky_relu(conv(g, ps, "dt.c1", g_feat, 1));
  return g.upsample_nearest(g.sigmoid(conv(g, ps, "dt.c2", h, 1)), 8);
}

template <class Real>
LsganVars lsgan_losses(Graph<Real>& g, Var real, Var fake) {
  LsganVars out;
  Var d;
  if (real.valid()) d = g.affine(g.mean(g.pow(g.affine(real, 1.0, -1.0), 2.0)), 0.5, 0.0);
  if (fake.valid()) {
    const Var df = g.affine(g.mean(g.pow(fake, 2.0)), 0.5, 0.0);
    d = d.valid() ? g.add(d, df) : df;
    out.g_loss = g.affine(g.mean(g.pow(g.affine(fake, 1.0, -1.0), 2.0)), 0.5, 0.0);
  }
  out.d_loss = d;
  return out;
}

template <class Real>
Var d_text_loss(Graph<Real>& g, Var text_map, Var orig_mask) {
  return dice_loss(g, text_map, orig_mask);
}

template <class Real>
double r_real(const nn::Tensor<Real>& text_map, const nn::Tensor<Real>& syn_mask) {
  if (text_map.shape != syn_mask.shape) throw InvalidArgument("r_real: shape mismatch");
  double inter = 0, sp = 0, st = 0;
  for (std::size_t i = 0; i < text_map.size(); ++i) {
    inter += static_cast<double>(text_map.data[i]) * syn_mask.data[i];
    sp += text_map.data[i];
    st += syn_mask.data[i];
  }
  return -(1.0 - (2.0 * inter + kDiceEps) / (sp + st + kDiceEps));
}

std::vector<double> r_real_batch(const nn::Tensor<float>& text_map, const nn::Tensor<float>& syn_mask) {
  if (text_map.shape != syn_mask.shape || text_map.rank() != 4)
    throw InvalidArgument("r_real_batch: shape mismatch");
  const int n = text_map.dim(0);
  const std::size_t per = text_map.size() / n;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    nn::Tensor<float> a({static_cast<int>(per)}), b({static_cast<int>(per)});
    std::copy_n(text_map.data.begin() + i * per, per, a.data.begin());
    std::copy_n(syn_mask.data.begin() + i * per, per, b.data.begin());
    out[i] = r_real(a, b);
  }
  return out;
}

#define STE_INST(R)                                                   \
  template void init_discriminator<R>(ParamSet<R>&, std::uint64_t);  \
  template Var d_patch<R>(Graph<R>&, ParamSet<R>&, Var);              \
  template Var d_text<R>(Graph<R>&, ParamSet<R>&, Var);               \
  template LsganVars lsgan_losses<R>(Graph<R>&, Var, Var);            \
  template Var d_text_loss<R>(Graph<R>&, Var, Var);                   \
  template double r_real<R>(const nn::Tensor<R>&, const nn::Tensor<R>&);
STE_INST(float)
STE_INST(double)
#undef STE_INST

}  // namespace ste::model
