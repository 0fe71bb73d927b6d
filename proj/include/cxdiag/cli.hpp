#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cxdiag::cli {

enum ExitCode : int {
  kHolds = 0,
  kViolated = 1,
  kUsageError = 2,
  kResourceError = 3,
};

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cxdiag::cli
