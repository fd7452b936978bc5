#pragma once

#include <string>
#include <vector>

namespace mrgd::cli {

// Exit codes: 0 success, 2 validation, 3 numerical (divergence / infeasible
// schedule / invalid bound), 4 I/O.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

// Runs one CLI invocation; args excludes the program name.
int run(std::vector<std::string> args);

}  // namespace mrgd::cli
