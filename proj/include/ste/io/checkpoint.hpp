#pragma once

#include <map>
#include <string>
#include <vector>

#include "ste/nn/params.hpp"

namespace ste::io {

// "STEW1" file: magic, then metadata strings, then named parameter sets
// (per-parameter name, shape and little-endian float32 values, followed by
// the optimizer state: step counter and Adam moments), then an FNV-1a
// checksum of everything before it.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, nn::ParamSet<float>>> sets;

  nn::ParamSet<float>& set(const std::string& name);
  const nn::ParamSet<float>& set(const std::string& name) const;
  bool has(const std::string& name) const;
};

std::string serialize(const Checkpoint& ck);
Checkpoint deserialize(const std::string& bytes);

// Written to path + ".tmp" and renamed, so a crash never leaves a torn file.
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

void save_checkpoint(const nn::ParamSet<float>& ps, const std::string& path);
nn::ParamSet<float> load_params(const std::string& path);

}  // namespace ste::io
