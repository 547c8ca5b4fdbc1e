#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace braingraph {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Exit codes of run_cli.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2 };

// Entry point of the braingraph tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace braingraph
