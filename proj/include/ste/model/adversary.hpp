#pragma once

#include "ste/model/erase.hpp"

namespace ste::model {

// Patch discriminator (3 stride-2 convs + 1x1 score) and the D_text head
// (2 convs on the generator bottleneck, sigmoid, nearest x8).
template <class Real>
void init_discriminator(ParamSet<Real>& ps, std::uint64_t seed);

template <class Real>
Var d_patch(Graph<Real>& g, ParamSet<Real>& ps, Var image);  // [N,3,H,W] -> [N,1,H/8,W/8]
template <class Real>
Var d_text(Graph<Real>& g, ParamSet<Real>& ps, Var g_feat);  // [N,64,h,w] -> [N,1,8h,8w]

struct LsganVars {
  Var d_loss, g_loss;
};

// d = 1/2 E[(real-1)^2] + 1/2 E[fake^2], g = 1/2 E[(fake-1)^2]. Either score
// may be invalid when only one side is needed.
template <class Real>
LsganVars lsgan_losses(Graph<Real>& g, Var real_scores, Var fake_scores);

// Dice against the original-text mask; synthetic text is a negative.
template <class Real>
Var d_text_loss(Graph<Real>& g, Var text_map, Var orig_mask);

// -dice(text_map, syn_mask) for one image, in [-1, 0].
template <class Real>
double r_real(const nn::Tensor<Real>& text_map, const nn::Tensor<Real>& syn_mask);

// Per-image rewards for a batch of text maps [N,1,H,W].
std::vector<double> r_real_batch(const nn::Tensor<float>& text_map, const nn::Tensor<float>& syn_mask);

}  // namespace ste::model
