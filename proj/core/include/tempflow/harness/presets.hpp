#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tempflow/grpo/trainer.hpp"
#include "tempflow/harness/config.hpp"

namespace tempflow::harness {

// flow-grpo:       global_std advantages, uniform weights, full SDE, terminal reward
// flow-grpo-fixed: as flow-grpo with groupwise_std advantages
// branch:          flow-grpo-fixed with per-step branch rewards
// tempflow:        branch with noise-aware weights
const std::vector<std::string>& preset_names();

// Sets the variant fields (adv_mode, weight_mode, branch_mode) and nothing
// else. Throws ConfigError (key "preset") for an unknown name.
void apply_preset(grpo::GrpoConfig& config, std::string_view name);
ExperimentConfig expand_preset(ExperimentConfig base, std::string_view name);

// Desk-scale two-Gaussian experiment rewarded toward the mode at (3, 0).
ExperimentConfig default_config();

}  // namespace tempflow::harness
