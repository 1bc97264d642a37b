#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dualstat::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs the command line `args` (without the program name). Returns the
/// process exit code; errors are reported on `err` as a single line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dualstat::cli
