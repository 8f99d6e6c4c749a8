#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace emergent {

inline constexpr int kExitOk = 0;
inline constexpr int kExitScenarioError = 1;
inline constexpr int kExitRuntimeError = 2;

// `args` excludes the program name. Subcommands: run, validate, summarize.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace emergent
