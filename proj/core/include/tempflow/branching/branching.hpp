#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "tempflow/common/rng.hpp"
#include "tempflow/common/types.hpp"
#include "tempflow/flowmodel/flow.hpp"
#include "tempflow/flowmodel/trajectory.hpp"
#include "tempflow/grpo/rollout_group.hpp"
#include "tempflow/rewards/rewards.hpp"
#include "tempflow/stochastic/schedule.hpp"

namespace tempflow::branching {

enum class BranchMode { single_branch, per_step_branch_reward };

struct BranchSpec {
  std::vector<std::size_t> branch_steps;  // sorted, unique transition indices
  BranchMode mode = BranchMode::single_branch;

  static BranchSpec single(std::size_t k);
  // Throws ContractError: empty, unsorted or duplicate steps, an index past
  // the grid, or more than one step in single_branch mode.
  void validate(std::size_t num_transitions) const;
  bool contains(std::size_t k) const;
};

struct BranchRollout {
  flow::Trajectory trajectory;
  std::size_t branch_index = 0;
  Vector eps_at_branch;
  double reward = 0.0;
};

// ODE everywhere except the transitions in spec.branch_steps, which take an
// SDE step with eps[j] for the j-th listed step.
flow::Trajectory branched_trajectory(const flow::FlowModel& model, const Vector& x_T, const BranchSpec& spec,
                                     const std::vector<Vector>& eps,
                                     const stochastic::NoiseSchedule& schedule);

// ODE up to transition k, one SDE step at k with `eps`, ODE to t = 0.
BranchRollout branch_rollout(const flow::FlowModel& model, const Vector& x_T, std::size_t k, const Vector& eps,
                             const stochastic::NoiseSchedule& schedule, const rewards::RewardFn& reward);

// G branch rollouts from a shared x_T at step k, one per entry of eps.
grpo::RolloutGroup group_branch_rollouts(const flow::FlowModel& model, const Vector& x_T, std::size_t k,
                                         const std::vector<Vector>& eps,
                                         const stochastic::NoiseSchedule& schedule,
                                         const rewards::RewardFn& reward, std::size_t condition = 0);

// Seeded form: x_T and each rollout's eps come from substreams of `rng`
// labeled by the condition id (and by step and rollout for eps).
grpo::RolloutGroup group_branch_rollouts(const flow::FlowModel& model, std::size_t condition, std::size_t k,
                                         std::size_t group_size, const Rng& rng,
                                         const stochastic::NoiseSchedule& schedule,
                                         const rewards::RewardFn& reward);

Vector condition_noise(const Rng& rng, std::size_t condition, std::size_t dim);

struct StdProfile {
  std::vector<double> times;
  std::vector<double> sigmas;
  std::vector<double> noise_levels;  // sigma sqrt(dt)
  std::vector<double> reward_std;    // mean over conditions of the within-group std
  std::vector<double> reward_mean;
};

// For every transition k: branch G rollouts at k from each condition's x_T and
// average the (population) reward std over conditions.
StdProfile reward_std_profile(const flow::FlowModel& model, std::size_t num_conditions, std::size_t group_size,
                              const stochastic::NoiseSchedule& schedule, const rewards::RewardFn& reward,
                              const Rng& rng);

// Columns: step_index, t, sigma, reward_std, reward_mean.
void write_profile_csv(const std::filesystem::path& path, const StdProfile& profile);

// Completes states that sit just after transition k with ODE steps and scores
// the results. Rows are states.
Vector complete_and_score(const flow::FlowModel& model, const Matrix& after_k, std::size_t k,
                          const stochastic::NoiseSchedule& schedule, const rewards::RewardFn& reward);

// R(ODE(SDE(x_k, eps_k))) for each k in `steps`, using the trajectory's own
// post-step state x_{k+1}. Every listed step must be an SDE step with eps.
std::vector<double> per_step_branch_rewards(const flow::FlowModel& model, const flow::Trajectory& traj,
                                            const stochastic::NoiseSchedule& schedule,
                                            const rewards::RewardFn& reward, const std::vector<std::size_t>& steps);

}  // namespace tempflow::branching
