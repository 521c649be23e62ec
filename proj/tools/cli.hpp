#pragma once

#include <ostream>

namespace ocksr::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalError = 3 };

/// Runs the command line `argv` (argv[0] is the program name), writing normal
/// output to `out` and diagnostics to `err`. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ocksr::cli
