#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spikes {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point behind the `spikes` executable: track, eval, synth, inspect.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spikes
