#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace enwalk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitIo = 2;

// Runs one subcommand. `args` excludes the program name. Output goes to
// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace enwalk::cli
