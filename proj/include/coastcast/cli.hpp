#pragma once

#include <string>
#include <vector>

namespace coastcast {

// Parses and runs one coastcast invocation. Returns the process exit code:
// 0 success, 2 usage error, 3 data/format error, 4 numeric failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace coastcast
