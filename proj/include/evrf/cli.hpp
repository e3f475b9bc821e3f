#pragma once

#include <string>
#include <vector>

namespace evrf {

/// Entry point of the command-line tool. Returns the process exit code:
/// 0 success, 2 input/config error, 3 numerical abort.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

} // namespace evrf
