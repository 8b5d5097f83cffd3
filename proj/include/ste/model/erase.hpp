#pragma once

#include <cstdint>
#include <string>

#include "ste/image.hpp"
#include "ste/nn/graph.hpp"

namespace ste::model {

using nn::Graph;
using nn::ParamSet;
using nn::Var;

enum class CompositeOrientation {
  as_printed,  // M * I_syn + (1 - M) * I_r
  complement,  // M * I_r + (1 - M) * I_syn
};

CompositeOrientation parse_orientation(const std::string& s);
std::string to_string(CompositeOrientation o);

struct LossWeights {
  double adv = 0.1;   // lambda1
  double rec = 1.0;   // lambda2
  double perc = 0.0;  // lambda3, must stay 0
  double sty = 0.0;   // lambda4, must stay 0
  double mask = 1.0;  // lambda5
  double tel = 2.0;   // lambda6
  double gamma = 2.0;
  double coarse = 0.5;  // weight of the coarse-stage reconstruction term inside L_rec
  void validate() const;
};

constexpr double kTelEps = 1e-8;
constexpr double kDiceEps = 1.0;

// Two-stage generator. Channels 16/32/64 per encoder, H and W divisible by 8.
template <class Real>
void init_generator(ParamSet<Real>& ps, std::uint64_t seed);

struct EraseVars {
  Var i_c, i_r, m_pred, g_feat;
};

// i_syn [N,3,H,W], m_syn [N,1,H,W].
template <class Real>
EraseVars generator_forward(Graph<Real>& g, ParamSet<Real>& ps, Var i_syn, Var m_syn);

// m3 is the mask broadcast to the image's channel count.
template <class Real>
Var composite(Graph<Real>& g, Var i_syn, Var i_r, Var m3, CompositeOrientation o);

// |I_r - I|_1 / (|I_r - I|_1 + |I_r - I_c|_1^gamma + eps), mean absolute differences.
template <class Real>
Var tel_loss(Graph<Real>& g, Var i_r, Var i_c, Var gt, double gamma);

// 1 - (2 sum(p t) + eps) / (sum p + sum t + eps) over the whole tensor.
template <class Real>
Var dice_loss(Graph<Real>& g, Var pred, Var target, double eps = kDiceEps);

struct LossVars {
  Var total, adv, rec, mask, tel;
};

struct LossInputs {
  Var i_syn, m_syn, m3, gt;
  Var adv;  // generator-side adversarial term; invalid means 0
};

template <class Real>
LossVars total_loss(Graph<Real>& g, const EraseVars& pass, const LossInputs& in, const LossWeights& w,
                    CompositeOrientation o);

// Inference on single images.
struct ErasePass {
  RasterImage i_c, i_r, m_pred;
  nn::Tensor<float> g_feat;
};

ErasePass erase(ParamSet<float>& gen, const RasterImage& i_syn, const BinaryMask& m_syn,
                Exec exec = Exec::parallel);
RasterImage composite(const RasterImage& i_syn, const RasterImage& i_r, const BinaryMask& m,
                      CompositeOrientation o = CompositeOrientation::as_printed);

}  // namespace ste::model
