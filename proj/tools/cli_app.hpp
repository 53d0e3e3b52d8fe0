#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dapt::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs the command line (without the program name). Returns the exit code:
/// 0 success, 1 runtime failure, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace dapt::cli
