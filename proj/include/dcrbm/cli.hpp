#pragma once

#include <string>
#include <vector>

namespace dcrbm::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 2,
  kDataError = 3,
  kVerificationFailure = 4,
  kMismatchError = 5,
  kInternalError = 1,
};

/// Parses argv (argv[0] is the program name) and runs one subcommand.
int run(const std::vector<std::string>& args);

}  // namespace dcrbm::cli
