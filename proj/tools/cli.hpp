#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace unitrank::cli {

/// Runs one command line (without the program name). Returns the exit code:
/// 0 success, 1 internal or backend error, 2 usage or input error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace unitrank::cli
