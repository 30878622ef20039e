#pragma once

// The plpde workflows. Each returns a process exit code:
//   0  success (converged / condition passes / estimates stable)
//   1  configuration error (the message names the field path)
//   2  stalled solve or inconclusive probe / unstable estimates (partial outputs written)
//   3  rank condition fails
// Diagnostics go to `diagnostics` as one JSON object per line.

#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

namespace plpde::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_configuration_error = 1,
    exit_stalled = 2,
    exit_rank_condition_fails = 3,
};

struct CommandOptions {
    std::optional<std::filesystem::path> output;  ///< overrides output.directory
    std::optional<double> radius;                 ///< verify-estimates ball radius
    std::vector<double> center;                   ///< verify-estimates ball center
    std::optional<double> harnack_shift;
};

int cmd_solve(const std::filesystem::path& config, const CommandOptions& options, std::ostream& diagnostics);
int cmd_probe_cone(const std::filesystem::path& config, const CommandOptions& options, std::ostream& diagnostics);
int cmd_verify_estimates(const std::filesystem::path& solution_dir, const CommandOptions& options,
                         std::ostream& diagnostics);
int cmd_mms(const std::filesystem::path& config, const CommandOptions& options, std::ostream& diagnostics);

/// Command-line front end (argument parsing and dispatch).
int run(int argc, char** argv);

}  // namespace plpde::cli
