#pragma once

#include <iosfwd>

namespace ste::cli {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitRuntime = 3;

// Parses argv, validates every input, then runs the subcommand.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ste::cli
