#pragma once

#include <string>

#include "selfexpl/config.hpp"

namespace selfexpl::commands {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 1;
inline constexpr int kBackendFailure = 2;
inline constexpr int kPartial = 3;

// Erasure attribution + pseudo-explanation construction + training files.
int cmd_build_dataset(const config::RunConfig& config);

// Faithfulness of backend-generated vs constructed explanations.
int cmd_validate_dataset(const config::RunConfig& config);

// Style evaluation runs, reports, traces, optional cross matrices.
int cmd_evaluate(const config::RunConfig& config);

// Frequent-word table over retained+faithful trace records.
int cmd_analyze(const config::RunConfig& config);

// Loads the config and dispatches; maps ConfigError to kConfigError.
int run_command(const std::string& command, const std::string& config_path);

}  // namespace selfexpl::commands
