#pragma once

#include <iosfwd>

namespace stochint {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Command-line entry point. Returns 0 when every metric passes, 1 when an
/// experiment fails or aborts, 2 on usage or configuration errors.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace stochint
