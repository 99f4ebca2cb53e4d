#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rdlearn::cli {

/// Runs one command line (args[0] is the program name). Returns the exit
/// status: 0 on success, 2 for usage or configuration errors, 1 for any
/// other failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rdlearn::cli
