#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bipedkit {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitTransport = 3;

/// Parses `args` (program name excluded), runs one subcommand and returns
/// its exit code. Primary output goes to `out` unless --out is given;
/// diagnostics go to `err` as one JSON object per line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bipedkit
