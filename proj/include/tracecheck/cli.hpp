#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "tracecheck/spec.hpp"

namespace tracecheck::cli {

/// Process exit codes; stable across releases.
enum ExitStatus : int {
    kOk = 0,
    kRejected = 1,
    kInconclusive = 2,
    kInputError = 3,
};

/// Registered specs: "twophase:<k>" and "tokenring:<n>". Throws Usage.
Spec spec_by_name(std::string_view name);

/// Runs the command line (without the program name) and returns the exit
/// code. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tracecheck::cli
