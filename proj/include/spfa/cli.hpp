#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spfa {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitNumerical = 2 };

// Entry point for the `spfa` command. `args` excludes the program name.
// Returns the process exit code; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spfa
