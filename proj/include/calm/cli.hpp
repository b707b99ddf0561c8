#pragma once

#include <string>
#include <vector>

namespace calm::cli {

/// Entry point behind the `calm` binary. Args exclude the program name.
/// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
int run(const std::vector<std::string>& args);

} // namespace calm::cli
