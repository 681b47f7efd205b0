#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace identiscope {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitAnalysisError = 1,
  kExitUsage = 2,
  kExitDisagreement = 3,
};

/// Runs `identiscope <args...>` (args excludes the program name). Human
/// output goes to `out`; errors go to `err` as one JSON object per line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace identiscope
