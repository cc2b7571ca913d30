#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace attnforge::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,
  kExitInfrastructure = 3,
  kExitBudgetExhausted = 4,
};

/// Runs one command line (without the program name). Normal output goes to
/// `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace attnforge::cli
