#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tempflow/autodiff/network.hpp"
#include "tempflow/autodiff/param_set.hpp"
#include "tempflow/grpo/advantages.hpp"
#include "tempflow/rewards/rewards.hpp"
#include "tempflow/stochastic/schedule.hpp"

namespace tempflow::grpo {

enum class BranchTraining {
  none,                    // full SDE rollouts, terminal reward on every transition
  single_branch,           // one SDE step per rollout, loss on that transition only
  per_step_branch_reward,  // full SDE rollouts, transition k rewarded by R(ODE(x_{k+1}))
};

std::string to_string(BranchTraining mode);
BranchTraining branch_training_from_string(const std::string& name);

struct GrpoConfig {
  std::size_t group_size = 8;
  std::size_t num_groups = 8;
  double clip_eps = 0.2;
  double beta = 0.001;
  AdvantageMode adv_mode = AdvantageMode::groupwise_std;
  WeightMode weight_mode = WeightMode::uniform;
  BranchTraining branch_mode = BranchTraining::none;
  // per_step_branch_reward: rewarded transitions (empty = all). Transitions
  // outside the subset do not enter the loss.
  std::vector<std::size_t> step_subset;
  // single_branch: draw k with probability proportional to the noise weights
  // instead of cycling through the grid.
  bool early_bias = false;
  double lr = 3e-4;
  std::size_t inner_epochs = 1;
  double std_guard = kStdGuard;

  // Throws ConfigError naming the offending grpo.* key.
  void validate(std::size_t num_transitions) const;
  bool operator==(const GrpoConfig&) const = default;
};

struct IterationMetrics {
  std::size_t iter = 0;        // 1-based; values measured after the update
  double mean_reward = 0.0;    // on the fixed ODE evaluation batch
  double reward_std = 0.0;     // mean within-group std of rollout outcome rewards
  double kl = 0.0;             // mean closed-form KL over trained transitions
  double loss = 0.0;           // total objective of the first inner epoch
  double mode_occupancy = 0.0; // fraction of the evaluation batch in the target
  std::vector<double> step_reward_std;  // per reward cohort
  std::uint64_t weight_hash = 0;
};

struct EvalSnapshot {
  double mean_reward = 0.0;
  double mode_occupancy = 0.0;
};

struct TrainOptions {
  std::size_t iterations = 300;
  std::uint64_t seed = 0;
  std::size_t eval_samples = 512;
  rewards::TargetFn in_target;  // occupancy is NaN when absent
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  std::function<void(const IterationMetrics&)> on_iteration;
};

struct TrainResult {
  ad::ParamSet params;
  std::vector<IterationMetrics> metrics;
  EvalSnapshot initial;
  EvalSnapshot final_eval;
  std::vector<std::filesystem::path> checkpoints;
};

// GRPO fine-tuning of a pretrained velocity network. The reference policy for
// the KL penalty is `initial`. Throws TrainingError with the iteration index
// when a loss, gradient or state stops being finite.
TrainResult train(const ad::Network& net, const ad::ParamSet& initial, const GrpoConfig& config,
                  const stochastic::NoiseSchedule& schedule, const rewards::RewardFn& reward,
                  const TrainOptions& options);

EvalSnapshot evaluate_policy(const ad::Network& net, const ad::ParamSet& params,
                             const stochastic::NoiseSchedule& schedule, const rewards::RewardFn& reward,
                             const rewards::TargetFn& in_target, const Matrix& eval_noise);

std::uint64_t hash_weights(const std::vector<double>& weights);

// Columns: iter, mean_reward, reward_std, kl, loss, mode_occupancy.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<IterationMetrics>& metrics);

}  // namespace tempflow::grpo
