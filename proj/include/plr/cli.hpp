#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace plr {

// Exit codes: 0 success, 2 usage or validation error, 1 runtime or I/O error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `plr` tool; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace plr
