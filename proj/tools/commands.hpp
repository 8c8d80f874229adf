#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace grapher::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMissingInput = 2;
inline constexpr int kExitValidation = 3;

/// Runs the `grapher` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace grapher::cli
