#pragma once

#include <string>
#include <vector>

namespace templar::cli {

/// Exit status: 0 success, 1 usage/config, 2 data error, 3 internal invariant
/// violation.
enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInvariant = 3 };

int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace templar::cli
