#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "zsq/error.hpp"

namespace zsq {

/// Stable exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitSimulation = 3,
  kExitEstimation = 4,
  kExitExperimentFail = 5,
};

int exit_code_for(ErrorKind kind);

/// Runs the command line `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zsq
