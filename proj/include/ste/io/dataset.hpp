#pragma once

#include <string>

#include "ste/synth.hpp"

namespace ste::io {

// Writes {id}_syn.png, {id}_gt.png, {id}_mask.png and {id}_style.json.
void write_sample(const SynthSample& sample, const StyleSpace& space, const std::string& out_dir,
                  const std::string& id);

// Reads back what write_sample produced. Images come back 8-bit quantized.
SynthSample read_sample(const StyleSpace& space, const std::string& dir, const std::string& id);

}  // namespace ste::io
