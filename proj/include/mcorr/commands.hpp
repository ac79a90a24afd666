#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mcorr {

inline constexpr const char* version = "0.1.0";

enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_validation = 2,
    exit_io = 3,
    exit_numerical = 4,
};

/// Runs the command line `args` (without the program name), writing progress
/// to `out` and diagnostics to `err`. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mcorr
