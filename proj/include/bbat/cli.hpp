#pragma once

#include <iosfwd>

namespace bbat {

/// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutputDirEnv = "BBAT_OUTPUT_DIR";

enum ExitCode : int { kExitOk = 0, kExitConfigError = 1, kExitRuntimeError = 2 };

/// Entry point behind the `bbat` executable. Subcommands: train, eval,
/// landscape, diversity, dmin-bench, print-config.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bbat
