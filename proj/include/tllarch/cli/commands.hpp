#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "tllarch/error.hpp"

namespace tllarch::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kPass = 0, kAuditFailure = 1, kConfigError = 2, kNumericalError = 3 };

int exit_code_for(ErrorCode code);

struct RunOptions {
  nlohmann::json config = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string out_dir = ".";
};

struct CommandResult {
  nlohmann::json report;
  int exit_code = kPass;
};

/// Runs one subcommand. `which` selects the check for verify and audit.
/// Library errors propagate; the caller maps them with exit_code_for.
CommandResult run_command(const std::string& command, const std::string& which, const RunOptions& options);

/// Runs a subcommand, writes <out>/<command>[-which].json and maps every
/// failure onto an exit code. Messages go to `log`.
int run_and_report(const std::string& command, const std::string& which, const RunOptions& options,
                   std::ostream& log);

}  // namespace tllarch::cli
