#pragma once

// The `divakit` command line. Exit codes: 0 success, 1 runtime failure,
// 2 usage or validation error.

#include <iosfwd>
#include <string>
#include <vector>

namespace divakit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace divakit::cli
