#include "ste/policy.hpp"

#include <cmath>

#include "ste/image_ops.hpp"

namespace ste::policy {

using nn::Graph;
using nn::ParamSet;
using nn::Tensor;
using nn::Var;

PolicyState encode_state(const RasterImage& img, const std::vector<TextAnnotation>& annotations) {
  if (img.empty() || (img.channels() != 3 && img.channels() != 1))
    throw InvalidArgument("encode_state: expects a non-empty 1- or 3-channel image");
  const int h = img.height(), w = img.width();
  const double n = static_cast<double>(h) * w;
  PolicyState s(kStateDim, 0.0f);

  for (int c = 0; c < 3; ++c) {
    const int src = img.channels() == 3 ? c : 0;
    std::array<double, 8> hist{};
    double sum = 0, sq = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = img.at(y, x, src);
        hist[std::min(7, static_cast<int>(v * 8))] += 1;
        sum += v;
        sq += v * v;
      }
    for (int b = 0; b < 8; ++b) s[c * 8 + b] = static_cast<float>(hist[b] / n);
    const double mean = sum / n;
    const double var = std::max(0.0, sq / n - mean * mean);
    s[40 + c] = static_cast<float>(mean);
    s[43 + c] = static_cast<float>(std::min(1.0, 2.0 * std::sqrt(var)));  // std <= 0.5 on [0,1]
  }

  const RasterImage edges = sobel_magnitude(img);
  for (int gy = 0; gy < 4; ++gy)
    for (int gx = 0; gx < 4; ++gx) {
      const int y0 = gy * h / 4, y1 = (gy + 1) * h / 4, x0 = gx * w / 4, x1 = (gx + 1) * w / 4;
      int hit = 0, tot = 0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          hit += edges.at(y, x) > kEdgeThreshold;
          ++tot;
        }
      s[24 + gy * 4 + gx] = tot ? static_cast<float>(static_cast<double>(hit) / tot) : 0.0f;
    }

  BinaryMask covered(h, w);
  for (const auto& a : annotations) {
    if (!a.bbox.inside(w, h)) throw InvalidArgument("encode_state: annotation outside the image");
    for (int y = a.bbox.y0; y < a.bbox.y1; ++y)
      for (int x = a.bbox.x0; x < a.bbox.x1; ++x) covered.at(y, x) = 1;
  }
  s[46] = static_cast<float>(std::min<std::size_t>(annotations.size(), 10) / 10.0);
  s[47] = static_cast<float>(covered.count() / n);
  return s;
}

namespace {

std::string head(int n) { return "pol.head" + std::to_string(n); }

int sentinel_row(const StyleSpace& sp, const PolicyConfig& cfg) { return 1 + sp.size() * cfg.max_choices; }

void check_space(const StyleSpace& sp, const PolicyConfig& cfg) {
  sp.validate();
  if (sp.max_choices() > cfg.max_choices)
    throw InvalidArgument("policy: an element has more than " + std::to_string(cfg.max_choices) + " choices");
}

bool allowed(const StyleElement& e, int parent_choice) {
  return std::find(e.parent_allows.begin(), e.parent_allows.end(), parent_choice) != e.parent_allows.end();
}

// Builds the unrolled policy on g. `choose(n, logsm)` returns element n's
// choices for the whole batch given its log-softmax values.
template <class Choose>
std::vector<Var> unroll(Graph<float>& g, ParamSet<float>& ps, const StyleSpace& sp,
                        const std::vector<PolicyState>& states, const PolicyConfig& cfg, Choose&& choose,
                        std::vector<std::vector<int>>& choices, std::vector<std::vector<std::uint8_t>>& active) {
  check_space(sp, cfg);
  const int M = static_cast<int>(states.size()), N = sp.size(), H = cfg.hidden;
  if (M == 0) throw InvalidArgument("policy: empty batch");
  Tensor<float> st({M, kStateDim});
  for (int m = 0; m < M; ++m) {
    if (states[m].size() != static_cast<std::size_t>(kStateDim)) throw InvalidArgument("policy: state must have 64 entries");
    std::copy(states[m].begin(), states[m].end(), st.data.begin() + m * kStateDim);
  }
  const Var proj = g.tanh(g.add_rowvec(g.matmul(g.input(st), g.param(ps.get("pol.proj.w"))), g.param(ps.get("pol.proj.b"))));
  const Var emb = g.param(ps.get("pol.emb"));
  Var h1 = g.input(Tensor<float>({M, H})), c1 = h1, h2 = h1, c2 = h1;
  const Var l1wx = g.param(ps.get("pol.l1.wx")), l1wh = g.param(ps.get("pol.l1.wh")), l1b = g.param(ps.get("pol.l1.b"));
  const Var l2wx = g.param(ps.get("pol.l2.wx")), l2wh = g.param(ps.get("pol.l2.wh")), l2b = g.param(ps.get("pol.l2.b"));

  choices.assign(M, std::vector<int>(N, 0));
  active.assign(M, std::vector<std::uint8_t>(N, 0));
  std::vector<int> prev(M, 0);  // start row
  std::vector<Var> out;
  for (int n = 0; n < N; ++n) {
    const Var x = g.concat(proj, g.embedding(emb, prev));
    const Var o1 = g.lstm_cell(x, h1, c1, l1wx, l1wh, l1b);
    h1 = g.slice_cols(o1, 0, H);
    c1 = g.slice_cols(o1, H, 2 * H);
    const Var o2 = g.lstm_cell(h1, h2, c2, l2wx, l2wh, l2b);
    h2 = g.slice_cols(o2, 0, H);
    c2 = g.slice_cols(o2, H, 2 * H);
    const Var logits = g.add_rowvec(g.matmul(h2, g.param(ps.get(head(n) + ".w"))), g.param(ps.get(head(n) + ".b")));
    const Var lsm = g.log_softmax(logits);
    out.push_back(lsm);
    const std::vector<int> pick = choose(n, g.value(lsm));
    const StyleElement& e = sp.elements[n];
    for (int m = 0; m < M; ++m) {
      if (pick[m] < 0 || pick[m] >= e.choices) throw InvalidArgument("policy: choice out of range for " + e.name);
      choices[m][n] = pick[m];
      active[m][n] = e.parent < 0 || (active[m][e.parent] && allowed(e, choices[m][e.parent]));
      prev[m] = active[m][n] ? 1 + n * cfg.max_choices + pick[m] : sentinel_row(sp, cfg);
    }
  }
  return out;
}

}  // namespace

void init_policy(ParamSet<float>& ps, const StyleSpace& space, std::uint64_t seed, const PolicyConfig& cfg) {
  check_space(space, cfg);
  Rng rng(derive_seed(seed, {0x706f6cULL}));
  const int H = cfg.hidden;
  nn::init_kaiming(ps.add("pol.proj.w", {kStateDim, cfg.proj}).value, kStateDim, rng);
  ps.add("pol.proj.b", {cfg.proj});
  nn::init_uniform(ps.add("pol.emb", {sentinel_row(space, cfg) + 1, cfg.embed}).value, 0.08, rng);
  nn::init_uniform(ps.add("pol.l1.wx", {cfg.proj + cfg.embed, 4 * H}).value, 0.08, rng);
  nn::init_uniform(ps.add("pol.l1.wh", {H, 4 * H}).value, 0.08, rng);
  ps.add("pol.l1.b", {4 * H});
  nn::init_uniform(ps.add("pol.l2.wx", {H, 4 * H}).value, 0.08, rng);
  nn::init_uniform(ps.add("pol.l2.wh", {H, 4 * H}).value, 0.08, rng);
  ps.add("pol.l2.b", {4 * H});
  for (int n = 0; n < space.size(); ++n) {
    ps.add(head(n) + ".w", {H, space.elements[n].choices});
    ps.add(head(n) + ".b", {space.elements[n].choices});
  }
}

std::vector<PolicySample> sample_styles(ParamSet<float>& ps, const StyleSpace& space,
                                        const std::vector<PolicyState>& states, Rng& rng, const PolicyConfig& cfg) {
  Graph<float> g(Exec::serial);
  const int M = static_cast<int>(states.size());
  std::vector<std::vector<double>> logp(M, std::vector<double>(space.size()));
  std::vector<std::vector<int>> choices;
  std::vector<std::vector<std::uint8_t>> active;
  unroll(g, ps, space, states, cfg,
         [&](int n, const Tensor<float>& lsm) {
           const int K = lsm.dim(1);
           std::vector<int> pick(M);
           for (int m = 0; m < M; ++m) {
             const double u = rng.uniform();
             double cum = 0;
             int k = 0;
             for (; k < K - 1; ++k) {
               cum += std::exp(static_cast<double>(lsm.data[m * K + k]));
               if (u < cum) break;
             }
             pick[m] = k;
             logp[m][n] = lsm.data[m * K + k];
           }
           return pick;
         },
         choices, active);
  std::vector<PolicySample> out(M);
  for (int m = 0; m < M; ++m) {
    out[m].style.choices = choices[m];
    out[m].style.seed = rng.next_u64();
    out[m].logp = logp[m];
    out[m].active = active[m];
  }
  return out;
}

PolicySample sample_style(ParamSet<float>& ps, const StyleSpace& space, const PolicyState& state, Rng& rng,
                          const PolicyConfig& cfg) {
  return sample_styles(ps, space, {state}, rng, cfg).front();
}

std::vector<std::vector<std::vector<double>>> choice_log_probs(ParamSet<float>& ps, const StyleSpace& space,
                                                               const std::vector<PolicyState>& states,
                                                               const std::vector<StyleVector>& styles,
                                                               const PolicyConfig& cfg) {
  if (styles.size() != states.size()) throw InvalidArgument("choice_log_probs: states/styles size mismatch");
  Graph<float> g(Exec::serial);
  const int M = static_cast<int>(states.size());
  std::vector<std::vector<std::vector<double>>> out(M, std::vector<std::vector<double>>(space.size()));
  std::vector<std::vector<int>> choices;
  std::vector<std::vector<std::uint8_t>> active;
  unroll(g, ps, space, states, cfg,
         [&](int n, const Tensor<float>& lsm) {
           const int K = lsm.dim(1);
           std::vector<int> pick(M);
           for (int m = 0; m < M; ++m) {
             out[m][n].assign(lsm.data.begin() + m * K, lsm.data.begin() + (m + 1) * K);
             pick[m] = styles[m].choices.at(n);
           }
           return pick;
         },
         choices, active);
  return out;
}

void DifficultyState::validate() const {
  if (!(l_mean >= 0) || !std::isfinite(l_mean)) throw InvalidArgument("l_mean must be finite and >= 0");
  if (!(momentum > 0 && momentum < 1)) throw InvalidArgument("momentum must lie in (0,1)");
  if (!(alpha > 1) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be > 1");
}

double r_diff(double loss, const DifficultyState& d) {
  if (!(loss >= 0) || !std::isfinite(loss)) throw InvalidArgument("r_diff: loss must be finite and >= 0");
  return -std::abs(1.0 - std::exp(loss - d.alpha * d.l_mean));
}

DifficultyState update_l_mean(DifficultyState d, double batch_loss) {
  if (!(batch_loss >= 0) || !std::isfinite(batch_loss)) throw InvalidArgument("update_l_mean: loss must be finite and >= 0");
  d.l_mean = d.momentum * d.l_mean + (1.0 - d.momentum) * batch_loss;
  return d;
}

namespace {

std::vector<double> zscore(const std::vector<double>& v) {
  double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::max(std::sqrt(var / v.size()), 1e-6);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
  return out;
}

}  // namespace

std::vector<double> combine_rewards(const std::vector<double>& r_real, const std::vector<double>& r_diff, double a1,
                                    double a2) {
  if (r_real.size() != r_diff.size()) throw InvalidArgument("combine_rewards: arrays differ in length");
  if (r_real.size() < 2) throw ContractError("combine_rewards: need at least 2 rewards to normalise");
  for (double v : r_real)
    if (!std::isfinite(v)) throw NumericError("combine_rewards: non-finite R_real");
  for (double v : r_diff)
    if (!std::isfinite(v)) throw NumericError("combine_rewards: non-finite R_diff");
  const auto a = zscore(r_real), b = zscore(r_diff);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a1 * a[i] + a2 * b[i];
  return out;
}

Var reinforce_objective(Graph<float>& g, ParamSet<float>& ps, const StyleSpace& space, const ReinforceBatch& batch,
                        const PolicyConfig& cfg) {
  const int M = static_cast<int>(batch.states.size()), N = space.size();
  if (batch.styles.size() != static_cast<std::size_t>(M) || batch.reward.size() != static_cast<std::size_t>(M) ||
      batch.active.size() != static_cast<std::size_t>(M))
    throw InvalidArgument("reinforce: batch arrays differ in length");
  std::vector<std::vector<int>> choices;
  std::vector<std::vector<std::uint8_t>> active;
  const auto lsm = unroll(g, ps, space, batch.states, cfg,
                          [&](int n, const Tensor<float>&) {
                            std::vector<int> pick(M);
                            for (int m = 0; m < M; ++m) pick[m] = batch.styles[m].choices.at(n);
                            return pick;
                          },
                          choices, active);
  const double scale = 1.0 / (static_cast<double>(M) * N);
  Var total;
  for (int n = 0; n < N; ++n) {
    Tensor<float> wt({M});
    std::vector<int> idx(M);
    for (int m = 0; m < M; ++m) {
      if (batch.active[m].size() != static_cast<std::size_t>(N)) throw InvalidArgument("reinforce: H has wrong length");
      wt.data[m] = batch.active[m][n] ? static_cast<float>(-batch.reward[m] * scale) : 0.0f;
      idx[m] = choices[m][n];
    }
    const Var term = g.sum(g.mul(g.pick(lsm[n], idx), g.input(wt)));
    total = total.valid() ? g.add(total, term) : term;
  }
  return total;
}

void reinforce_update(ParamSet<float>& ps, const StyleSpace& space, const ReinforceBatch& batch, double lr,
                      const PolicyConfig& cfg) {
  ps.zero_grad();
  Graph<float> g(Exec::serial);
  g.backward(reinforce_objective(g, ps, space, batch, cfg));
  try {
    nn::adam_step(ps, lr);
  } catch (...) {
    ps.zero_grad();
    throw;
  }
}

}  // namespace ste::policy
