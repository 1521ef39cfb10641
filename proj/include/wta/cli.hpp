#pragma once

#include <string>
#include <vector>

namespace wta::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point for the `wta` tool. Subcommands: train, eval, convert,
/// reject, adversarial, viz, xval-lr. Returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

std::string version();

}  // namespace wta::cli
