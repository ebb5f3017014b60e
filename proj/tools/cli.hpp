#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace taskcl::cli {

// Runs the taskcl command line. Returns the process exit code:
// 0 ok, 2 config error, 3 data error, 4 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace taskcl::cli
