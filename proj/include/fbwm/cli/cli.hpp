#pragma once

#include <string>
#include <vector>

namespace fbwm::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitMissingFile = 2,
    kExitDigestMismatch = 3,
    kExitBadConfig = 4,
    kExitNoRuns = 5,
    kExitBadFormat = 6,
    kExitFailure = 10,
};

const char* code_version();

// Entry point of the `fbwm` tool. On failure prints one JSON line
// {"error": ..., "exit": ..., "message": ...} to stderr and returns the
// matching exit code.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace fbwm::cli
