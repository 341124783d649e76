#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace falconc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Runs one subcommand. args excludes the program name. A JSON config file
// (--config PATH, or the FALCONC_CONFIG environment variable) may supply
// any flag; flags given on the command line win.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace falconc::cli
