#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace burnsem {

enum ExitCode : int {
    kExitOk = 0,
    kExitUnexpected = 1,
    kExitUsage = 2,
    kExitValidation = 3,  // also malformed input files
    kExitNumerical = 4,
    kExitIo = 5,
};

// Entry point of the burnsem tool: simulate, fit, predict, serve, replay.
// Writes reports to `out` and diagnostics to `err`; returns an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace burnsem
