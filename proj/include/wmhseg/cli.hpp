#pragma once

#include <string>
#include <vector>

namespace wmhseg {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitUsageError = 2;

/// Runs one sub-command. args[0] is the program name. Logs go to standard
/// error; returns one of the exit statuses above.
int run_cli(const std::vector<std::string>& args);

/// Parses "key = value" lines ('#' starts a comment) into "--key value"
/// argument pairs. Throws std::runtime_error on a line without '='.
std::vector<std::string> config_file_arguments(const std::string& text);

}  // namespace wmhseg
