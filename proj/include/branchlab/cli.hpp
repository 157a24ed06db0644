#pragma once

#include <string>
#include <vector>

namespace branchlab {

/// Full CLI entry point (what tools/main.cpp wraps).  Returns the process
/// exit code: 0 all-pass, 2 hard failure, 3 soft-band miss, 64 usage error.
int run_cli(const std::vector<std::string>& args);

}  // namespace branchlab
