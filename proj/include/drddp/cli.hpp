#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drddp/config.hpp"

namespace drddp {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitNotConverged = 3,
  kExitNumericalFailure = 4,
};

struct CliOptions {
  std::string command;  // solve | tune | eval | bench
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> controller;
  std::optional<std::string> lambda_grid;
  std::optional<std::string> sizes;
};

// Loads the config file and applies command-line overrides.
RunConfig resolve_config(const CliOptions& opts);

int cmd_solve(const RunConfig& cfg);
int cmd_tune(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_bench(const RunConfig& cfg);

// resolve_config + dispatch, mapping exceptions to exit codes.
int run_command(const CliOptions& opts);

// Reads DRDDP_LOG_LEVEL (trace, debug, info, warn, err, critical, off).
void configure_logging();

// SHA-1 of "blob <size>\0<content>", as git hash-object computes it.
std::string git_blob_sha1(const std::string& content);

}  // namespace drddp
