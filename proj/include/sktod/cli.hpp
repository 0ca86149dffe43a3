#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sktod::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPartial = 2;

// Runs one subcommand. `args` excludes the program name. Machine-readable
// output goes to `out` (or the --out file), diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sktod::cli
