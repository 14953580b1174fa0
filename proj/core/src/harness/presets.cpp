#include "tempflow/harness/presets.hpp"

#include "tempflow/common/errors.hpp"

namespace tempflow::harness {

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"flow-grpo", "flow-grpo-fixed", "branch", "tempflow"};
  return names;
}

void apply_preset(grpo::GrpoConfig& config, std::string_view name) {
  using grpo::AdvantageMode;
  using grpo::BranchTraining;
  using grpo::WeightMode;
  if (name == "flow-grpo") {
    config.adv_mode = AdvantageMode::global_std;
    config.weight_mode = WeightMode::uniform;
    config.branch_mode = BranchTraining::none;
  } else if (name == "flow-grpo-fixed") {
    config.adv_mode = AdvantageMode::groupwise_std;
    config.weight_mode = WeightMode::uniform;
    config.branch_mode = BranchTraining::none;
  } else if (name == "branch") {
    config.adv_mode = AdvantageMode::groupwise_std;
    config.weight_mode = WeightMode::uniform;
    config.branch_mode = BranchTraining::per_step_branch_reward;
  } else if (name == "tempflow") {
    config.adv_mode = AdvantageMode::groupwise_std;
    config.weight_mode = WeightMode::noise_aware;
    config.branch_mode = BranchTraining::per_step_branch_reward;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'", "preset");
  }
}

ExperimentConfig expand_preset(ExperimentConfig base, std::string_view name) {
  apply_preset(base.grpo, name);
  base.validate();
  return base;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.seed = 0;
  c.data = flow::two_gaussians(3.0, 0.3);
  c.reward.kind = rewards::RewardKind::mode_density;
  c.reward.mean = Vector(2);
  c.reward.mean << 3.0, 0.0;
  c.reward.cov = 0.09 * Matrix::Identity(2, 2);
  c.analysis.direction = Vector::Ones(2);
  c.validate();
  return c;
}

}  // namespace tempflow::harness
