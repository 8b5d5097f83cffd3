#pragma once

#include <vector>

#include "ste/image.hpp"
#include "ste/nn/graph.hpp"
#include "ste/style.hpp"
#include "ste/synth.hpp"

namespace ste::policy {

constexpr int kStateDim = 64;
constexpr double kEdgeThreshold = 0.1;  // Sobel magnitude counted as an edge

// 24 histogram bins, 16 edge-density cells, 6 mean/std, 2 annotation stats,
// zero padding. All entries in [0,1].
using PolicyState = std::vector<float>;

PolicyState encode_state(const RasterImage& img, const std::vector<TextAnnotation>& annotations = {});

struct PolicyConfig {
  int hidden = 64;
  int embed = 16;
  int proj = 32;
  int max_choices = 12;
};

// Projection, choice embeddings (+ start and sentinel rows), two LSTM layers,
// and one zero-initialised softmax head per element.
void init_policy(nn::ParamSet<float>& ps, const StyleSpace& space, std::uint64_t seed,
                 const PolicyConfig& cfg = {});

struct PolicySample {
  StyleVector style;
  std::vector<double> logp;           // log p of the sampled choice, per element
  std::vector<std::uint8_t> active;   // hierarchy mask H
};

// Samples one style per state. Element n sees the embedding of choice n-1, or
// the sentinel when element n-1 is inactive, so inactive choices never reach
// later steps.
std::vector<PolicySample> sample_styles(nn::ParamSet<float>& ps, const StyleSpace& space,
                                        const std::vector<PolicyState>& states, Rng& rng,
                                        const PolicyConfig& cfg = {});
PolicySample sample_style(nn::ParamSet<float>& ps, const StyleSpace& space, const PolicyState& state,
                          Rng& rng, const PolicyConfig& cfg = {});

// Full per-element log-softmax tables for given choices (teacher forcing):
// out[m][n] holds element n's log-probabilities for sample m.
std::vector<std::vector<std::vector<double>>> choice_log_probs(nn::ParamSet<float>& ps, const StyleSpace& space,
                                                               const std::vector<PolicyState>& states,
                                                               const std::vector<StyleVector>& styles,
                                                               const PolicyConfig& cfg = {});

struct DifficultyState {
  double l_mean = 0;
  double momentum = 0.99;
  double alpha = 1.2;
  void validate() const;
};

// -|1 - exp(L - alpha * l_mean)|
double r_diff(double loss, const DifficultyState& d);
DifficultyState update_l_mean(DifficultyState d, double batch_loss);

// z-score each array over the batch (sigma floor 1e-6), then a1 * real + a2 * diff.
std::vector<double> combine_rewards(const std::vector<double>& r_real, const std::vector<double>& r_diff,
                                    double a1 = 1.0, double a2 = 1.0);

struct ReinforceBatch {
  std::vector<PolicyState> states;
  std::vector<StyleVector> styles;
  std::vector<std::vector<std::uint8_t>> active;
  std::vector<double> reward;  // combined, normalised R_m
};

// -(1/(M N)) sum_m sum_n H_mn R_m log p_mn, built on g.
nn::Var reinforce_objective(nn::Graph<float>& g, nn::ParamSet<float>& ps, const StyleSpace& space,
                            const ReinforceBatch& batch, const PolicyConfig& cfg = {});

// One Adam ascent step on the masked REINFORCE objective.
void reinforce_update(nn::ParamSet<float>& ps, const StyleSpace& space, const ReinforceBatch& batch, double lr,
                      const PolicyConfig& cfg = {});

}  // namespace ste::policy
