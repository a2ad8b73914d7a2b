#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rankcop::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable read for the default thread count.
inline constexpr const char* kThreadsEnv = "RANKCOP_THREADS";

/// Runs one command line. args[0] is the program name. Results that have no
/// output path go to `out`; diagnostics and usage text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace rankcop::cli
