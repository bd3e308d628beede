#pragma once

#include <string>
#include <vector>

namespace demix::cli {

/// Exit codes: 0 success, 2 bad input or configuration, 3 numerical or
/// estimation failure, 1 anything else.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

/// Single-line key=value error record written to stderr on failure.
std::string error_record(const std::string& kind, int exit_code, const std::string& message);

}  // namespace demix::cli
