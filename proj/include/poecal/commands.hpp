#pragma once

#include "poecal/presets.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace poecal {

struct CommandContext {
  ExperimentConfig config;
  std::filesystem::path out_dir = "out";
  std::optional<double> truth;  // restricts field/em/gradient to one measurement
};

/// Each command writes its primary outputs under out_dir and returns the
/// summary JSON. Wall-clock timings go to a separate timing.json.
Json cmd_field(const CommandContext& ctx);
Json cmd_em(const CommandContext& ctx);
Json cmd_ablate(const CommandContext& ctx, const std::string& kind);
Json cmd_gradient(const CommandContext& ctx, const std::vector<double>& a, bool sum_to_one);

/// Parses argv, runs the subcommand and maps failures to exit codes
/// (0 ok, 2 configuration/domain, 3 numerical). Errors are printed to
/// stderr as a JSON object.
int run_cli(int argc, const char* const* argv);

}  // namespace poecal
