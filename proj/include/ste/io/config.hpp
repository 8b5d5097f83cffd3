#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ste/model/erase.hpp"
#include "ste/synth.hpp"

namespace ste::io {

struct RunConfig {
  std::uint64_t seed = 0;
  int image_size = 64;
  int batch_size = 32;
  int total_steps = 2000;
  int eval_every = 500;
  int eval_samples = 16;
  int policy_cadence = 150;
  int reward_batch = 100;
  int policy_warmup = 300;
  bool policy_enabled = true;
  double lr_generator = 1e-4;
  double lr_discriminator = 1e-5;
  double lr_policy = 5e-5;
  model::LossWeights loss;
  double reward_alpha = 1.2;
  double reward_a1 = 1.0;
  double reward_a2 = 1.0;
  double reward_momentum = 0.99;
  model::CompositeOrientation orientation = model::CompositeOrientation::complement;
  // style.<element>.choices: keep only the first k choices of an element.
  std::map<std::string, int> style_choices;
};

// Flat "key = value" text; '#' starts a comment. Unknown keys, duplicate keys
// and out-of-range values are rejected (ParseError with the line for files,
// InvalidArgument for overrides).
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Applies "key=value" overrides on top of cfg.
RunConfig apply_overrides(RunConfig cfg, const std::vector<std::string>& sets);

// Canonical resolved form: every key, sorted, one "key = value" per line.
std::string to_text(const RunConfig& cfg);
// FNV-1a of to_text(cfg).
std::uint64_t fingerprint(const RunConfig& cfg);

// Documented schema: key, default, allowed range, meaning.
std::string schema_help();

StyleSpace make_space(const RunConfig& cfg);
SynthOptions make_synth_options(const RunConfig& cfg);

}  // namespace ste::io
