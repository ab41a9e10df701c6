#pragma once

#include <string>
#include <vector>

namespace neurogrow::cli {

// Exit codes: 0 success, 2 config error, 3 data error, 4 runtime failure.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

/// Run the CLI on argv-style arguments (without the program name).
int run(const std::vector<std::string>& args);

}  // namespace neurogrow::cli
