#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ste/io/checkpoint.hpp"
#include "ste/io/config.hpp"
#include "ste/io/manifest.hpp"
#include "ste/policy.hpp"

namespace ste::train {

struct TrainImage {
  RasterImage image;
  std::vector<TextAnnotation> texts;
  std::vector<Rect> blanks;
  BinaryMask text_box;  // union of annotation boxes
  policy::PolicyState state;
};

// Decodes and resizes every record to size x size; rectangles are scaled
// outward and clamped.
std::vector<TrainImage> load_images(const std::vector<io::ManifestRecord>& records, int size);
TrainImage make_train_image(RasterImage image, std::vector<TextAnnotation> texts, std::vector<Rect> blanks);

struct StepRecord {
  int step = 0;
  double d_loss = 0, d_text = 0;
  double g_total = 0, g_adv = 0, rec = 0, mask = 0, tel = 0;
  double l1 = 0;  // batch mean |I_pred - I_gt|
  double l_mean = 0;
  bool policy_sampled = false;
};

struct PhaseRecord {
  int step = 0;
  bool skipped = false;
  std::string reason;
  int samples = 0;
  double mean_r_real = 0, mean_r_diff = 0, mean_loss = 0;
};

struct ModelMetrics {
  double l1 = 0;          // mean |I_pred - I_gt|
  double psnr = 0, ssim = 0;
  double refine_gap = 0;  // mean |I_r - I_c|
};

// Fixed, uniformly styled pairs for tracking a model over training.
std::vector<SynthSample> make_eval_set(const std::vector<TrainImage>& images, int n, std::uint64_t seed,
                                       const StyleSpace& space, const SynthOptions& opts);
// I_pred per sample, composited with orientation o.
std::vector<RasterImage> predict(nn::ParamSet<float>& gen, const std::vector<SynthSample>& samples,
                                 model::CompositeOrientation o, Exec exec = Exec::parallel);
ModelMetrics evaluate_model(nn::ParamSet<float>& gen, const std::vector<SynthSample>& samples,
                            model::CompositeOrientation o, Exec exec = Exec::parallel);

struct TrainerOptions {
  std::string out_dir;  // empty: nothing is written
  Exec exec = Exec::parallel;
  std::vector<SynthSample> eval_set;
  std::ostream* log = nullptr;
  // Replaces the model-based rewards of a policy phase: R_m = z(override(style_m)).
  std::function<double(const StyleVector&)> reward_override;
};

// Alternating optimisation: each step trains D/D_text then G on a freshly
// synthesised batch; every policy_cadence steps (from policy_warmup on) the
// policy gets one REINFORCE update from reward_batch scored samples.
// All randomness is derived from (seed, step), so a restored checkpoint
// continues the exact trajectory.
class Trainer {
 public:
  Trainer(io::RunConfig cfg, std::vector<TrainImage> images, TrainerOptions opt = {});

  StepRecord step();
  // Steps until total_steps, checkpointing every eval_every and at the end.
  // A run starting from step 0 replaces existing logs in out_dir.
  void run();
  PhaseRecord policy_phase();

  struct Batch {
    std::vector<SynthSample> samples;
    std::vector<int> image;  // source image of each sample
    bool policy_sampled = false;
  };
  // Batch for a given step (1-based).
  Batch make_batch(int step);
  bool phase_due(int step) const;

  io::Checkpoint checkpoint() const;
  // Config must match apart from total_steps. Log rows past the
  // checkpoint's step are dropped.
  void restore(const io::Checkpoint& ck);
  void save(const std::string& path) const;

  int steps_done() const { return step_; }
  const io::RunConfig& config() const { return cfg_; }
  const StyleSpace& space() const { return space_; }
  const SynthOptions& synth_options() const { return synth_; }
  const policy::DifficultyState& difficulty() const { return diff_; }
  const std::vector<PhaseRecord>& phases() const { return phases_; }
  nn::ParamSet<float>& generator() { return gen_; }
  nn::ParamSet<float>& discriminator() { return disc_; }
  nn::ParamSet<float>& policy() { return pol_; }

 private:
  StepRecord train_step(const Batch& batch);
  void write_eval();
  void append_csv(const std::string& file, const std::string& header, const std::string& row) const;

  io::RunConfig cfg_;
  std::vector<TrainImage> images_;
  TrainerOptions opt_;
  StyleSpace space_;
  SynthOptions synth_;
  nn::ParamSet<float> gen_, disc_, pol_;
  policy::DifficultyState diff_;
  int step_ = 0;
  int phase_count_ = 0;
  std::vector<PhaseRecord> phases_;
};

// Empirical choice frequencies of a policy over images: counts[n][c] over
// samples where element n is active.
struct ChoiceStats {
  std::vector<std::vector<long>> counts;
  std::vector<long> active;
  std::vector<std::vector<double>> proportions() const;
  // Pearson chi-square p-value of element n against uniform choice.
  double uniform_p_value(int n) const;
};

ChoiceStats choice_stats(nn::ParamSet<float>& pol, const StyleSpace& space,
                         const std::vector<policy::PolicyState>& states, int samples_per_state, std::uint64_t seed);
void write_choice_stats(const ChoiceStats& s, const StyleSpace& space, const std::string& path);

}  // namespace ste::train
