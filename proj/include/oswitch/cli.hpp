#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oswitch {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitIo = 1,          // I/O, parse or artifact-integrity error
    kExitRefused = 2,     // assumption refuted or configuration refused
    kExitNoConverge = 3,  // iteration hit max_iter
    kExitCompare = 4,     // cross-validation outside budgets
};

/// Runs `oswitch <command> [flags]`. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oswitch
