#pragma once

#include <ostream>

#include "bbsel/common.hpp"

namespace bbsel::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;  // bad flags or inconsistent configuration
inline constexpr int kExitIo = 3;
inline constexpr int kExitFormat = 4;
inline constexpr int kExitInvalid = 5;

int exit_code(ErrorKind kind);

/// Parses argv (argv[0] is the program name), runs one subcommand, and
/// returns the exit code. Diagnostics go to err, progress to out.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bbsel::cli
