#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace natbound::cli {

enum ExitCode : int {
    kSuccess = 0,
    kParseError = 2,
    kNumericalFailure = 3,
    kInconclusive = 4,
};

/// Runs one subcommand. `args` excludes the program name. The JSON result
/// (or error object) goes to `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace natbound::cli
