#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nmfuse::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 2;
inline constexpr int kDataError = 3;

// Runs the `nmfuse` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nmfuse::cli
