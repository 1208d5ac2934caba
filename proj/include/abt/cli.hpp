#pragma once

#include <string>
#include <vector>

namespace abt::cli {

// Entry point behind the abt binary. Exit codes: 0 success, 1 runtime
// failure, 2 usage/config error. Errors print one line to stderr.
int run(const std::vector<std::string>& args);

}  // namespace abt::cli
