#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace payflow::cli {

/// Exit codes: 0 all expectations hold, 1 an expectation failed, 2 invalid input.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitInvalid = 2;

/// `args` excludes the program name. Subcommands: run, validate, verify.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace payflow::cli
