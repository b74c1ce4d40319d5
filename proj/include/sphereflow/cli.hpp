#pragma once

#include <string>
#include <vector>

namespace sphereflow {

/// Exit statuses of the command-line front end.
enum ExitStatus : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitNumerical = 2,
  kExitIo = 3,
};

/// Subcommands:
///   run      --config <path> --out <dir> [--threads k]
///   diagnose --trace <dir> --anchors <ndjson> --out <dir> [--threads k]
///   sweep    --config <path> --lambda 1e2,1e3,1e4 --out <dir> [--threads k]
/// args excludes the program name. Messages go to stderr.
int run_cli(const std::vector<std::string>& args);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sphereflow
