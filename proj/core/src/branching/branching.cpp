#include "tempflow/branching/branching.hpp"

#include <algorithm>
#include <string>

#include "tempflow/common/csv.hpp"
#include "tempflow/common/errors.hpp"
#include "tempflow/common/stats.hpp"
#include "tempflow/stochastic/sde.hpp"

namespace tempflow::branching {

using stochastic::NoiseSchedule;

BranchSpec BranchSpec::single(std::size_t k) { return BranchSpec{{k}, BranchMode::single_branch}; }

void BranchSpec::validate(std::size_t num_transitions) const {
  if (branch_steps.empty()) throw ContractError("BranchSpec: no branch steps");
  if (mode == BranchMode::single_branch && branch_steps.size() != 1)
    throw ContractError("BranchSpec: single_branch mode needs exactly one step");
  for (std::size_t j = 0; j < branch_steps.size(); ++j) {
    if (branch_steps[j] >= num_transitions) throw ContractError("BranchSpec: step index outside the grid");
    if (j > 0 && branch_steps[j] <= branch_steps[j - 1])
      throw ContractError("BranchSpec: steps must be strictly increasing");
  }
}

bool BranchSpec::contains(std::size_t k) const {
  return std::binary_search(branch_steps.begin(), branch_steps.end(), k);
}

flow::Trajectory branched_trajectory(const flow::FlowModel& model, const Vector& x_T, const BranchSpec& spec,
                                     const std::vector<Vector>& eps, const NoiseSchedule& schedule) {
  spec.validate(schedule.num_transitions());
  if (eps.size() != spec.branch_steps.size()) throw ContractError("branched_trajectory: one eps per branch step");
  if (!x_T.allFinite()) throw ContractError("branched_trajectory: x_T must be finite");
  flow::Trajectory traj;
  traj.times = schedule.times();
  traj.states.push_back(x_T);
  std::size_t next = 0;
  for (std::size_t i = 0; i < schedule.num_transitions(); ++i) {
    const Vector& x = traj.states.back();
    if (next < spec.branch_steps.size() && spec.branch_steps[next] == i) {
      const Vector& e = eps[next++];
      const stochastic::Transition tr = stochastic::sde_step(model, x, schedule, i, e);
      flow::StepMeta meta{flow::StepKind::sde, e, std::nullopt};
      if (tr.std_scalar > 0.0) meta.logp = stochastic::log_prob(tr.mean, tr.std_scalar, tr.x_to);
      traj.states.push_back(tr.x_to);
      traj.steps.push_back(std::move(meta));
    } else {
      traj.states.push_back(flow::ode_step(model, x, schedule.t(i), schedule.dt(i)));
      traj.steps.push_back(flow::StepMeta{});
    }
  }
  return traj;
}

BranchRollout branch_rollout(const flow::FlowModel& model, const Vector& x_T, std::size_t k, const Vector& eps,
                             const NoiseSchedule& schedule, const rewards::RewardFn& reward) {
  if (eps.size() != x_T.size()) throw ContractError("branch_rollout: eps dimension does not match x_T");
  BranchRollout out;
  out.trajectory = branched_trajectory(model, x_T, BranchSpec::single(k), {eps}, schedule);
  out.branch_index = k;
  out.eps_at_branch = eps;
  out.reward = reward(out.trajectory.final_state());
  return out;
}

grpo::RolloutGroup group_branch_rollouts(const flow::FlowModel& model, const Vector& x_T, std::size_t k,
                                         const std::vector<Vector>& eps, const NoiseSchedule& schedule,
                                         const rewards::RewardFn& reward, std::size_t condition) {
  if (eps.size() < 2) throw ContractError("group_branch_rollouts: group size must be >= 2");
  grpo::RolloutGroup group;
  group.condition = condition;
  group.rewards.resize(static_cast<Eigen::Index>(eps.size()), 1);
  for (std::size_t j = 0; j < eps.size(); ++j) {
    BranchRollout r = branch_rollout(model, x_T, k, eps[j], schedule, reward);
    group.rewards(static_cast<Eigen::Index>(j), 0) = r.reward;
    group.rollouts.push_back(std::move(r.trajectory));
  }
  group.reward_steps = {k};
  return group;
}

Vector condition_noise(const Rng& rng, std::size_t condition, std::size_t dim) {
  return rng.derive("condition", condition).derive("x_T").normal_vector(static_cast<Eigen::Index>(dim));
}

namespace {

Rng eps_stream(const Rng& rng, std::size_t condition, std::size_t k) {
  return rng.derive("condition", condition).derive("eps-step", k);
}

}  // namespace

grpo::RolloutGroup group_branch_rollouts(const flow::FlowModel& model, std::size_t condition, std::size_t k,
                                         std::size_t group_size, const Rng& rng, const NoiseSchedule& schedule,
                                         const rewards::RewardFn& reward) {
  if (group_size < 2) throw ContractError("group_branch_rollouts: group size must be >= 2");
  const std::size_t d = model.state_dim();
  const Vector x_T = condition_noise(rng, condition, d);
  Rng eps_rng = eps_stream(rng, condition, k);
  std::vector<Vector> eps;
  for (std::size_t j = 0; j < group_size; ++j) eps.push_back(eps_rng.normal_vector(static_cast<Eigen::Index>(d)));
  return group_branch_rollouts(model, x_T, k, eps, schedule, reward, condition);
}

Vector complete_and_score(const flow::FlowModel& model, const Matrix& after_k, std::size_t k,
                          const NoiseSchedule& schedule, const rewards::RewardFn& reward) {
  if (k >= schedule.num_transitions()) throw ContractError("complete_and_score: step index outside the grid");
  return rewards::evaluate(reward, flow::ode_sample_batch(model, after_k, schedule, k + 1));
}

StdProfile reward_std_profile(const flow::FlowModel& model, std::size_t num_conditions, std::size_t group_size,
                              const NoiseSchedule& schedule, const rewards::RewardFn& reward, const Rng& rng) {
  if (num_conditions < 1) throw ContractError("reward_std_profile: need at least one condition");
  if (group_size < 2) throw ContractError("reward_std_profile: group size must be >= 2");
  const auto d = static_cast<Eigen::Index>(model.state_dim());
  const auto C = static_cast<Eigen::Index>(num_conditions);
  const auto G = static_cast<Eigen::Index>(group_size);
  const std::size_t T = schedule.num_transitions();

  StdProfile profile;
  profile.times.assign(schedule.times().begin(), schedule.times().end() - 1);
  profile.sigmas = schedule.sigmas();
  profile.noise_levels = schedule.noise_levels();

  Matrix x(C, d);
  for (Eigen::Index c = 0; c < C; ++c)
    x.row(c) = condition_noise(rng, static_cast<std::size_t>(c), model.state_dim()).transpose();

  for (std::size_t k = 0; k < T; ++k) {
    Matrix branched(C * G, d);
    Matrix eps(C * G, d);
    for (Eigen::Index c = 0; c < C; ++c) {
      Rng eps_rng = eps_stream(rng, static_cast<std::size_t>(c), k);
      for (Eigen::Index j = 0; j < G; ++j) {
        branched.row(c * G + j) = x.row(c);
        eps.row(c * G + j) = eps_rng.normal_vector(d).transpose();
      }
    }
    const Matrix after = stochastic::sde_step(model, branched, schedule, k, eps).x_to;
    const Vector r = complete_and_score(model, after, k, schedule, reward);
    double std_sum = 0.0;
    double mean_sum = 0.0;
    for (Eigen::Index c = 0; c < C; ++c) {
      const std::span<const double> group(r.data() + c * G, static_cast<std::size_t>(G));
      std_sum += stats::population_std(group);
      mean_sum += stats::mean(group);
    }
    profile.reward_std.push_back(std_sum / static_cast<double>(C));
    profile.reward_mean.push_back(mean_sum / static_cast<double>(C));
    x = flow::ode_step(model, x, schedule.t(k), schedule.dt(k));
  }
  return profile;
}

void write_profile_csv(const std::filesystem::path& path, const StdProfile& profile) {
  CsvWriter csv(path, {"step_index", "t", "sigma", "reward_std", "reward_mean"});
  for (std::size_t k = 0; k < profile.reward_std.size(); ++k)
    csv.row(static_cast<long long>(k),
            {profile.times[k], profile.sigmas[k], profile.reward_std[k], profile.reward_mean[k]});
}

std::vector<double> per_step_branch_rewards(const flow::FlowModel& model, const flow::Trajectory& traj,
                                            const NoiseSchedule& schedule, const rewards::RewardFn& reward,
                                            const std::vector<std::size_t>& steps) {
  if (!traj.valid()) throw ContractError("per_step_branch_rewards: malformed trajectory");
  if (traj.num_transitions() != schedule.num_transitions())
    throw ContractError("per_step_branch_rewards: trajectory and schedule lengths differ");
  std::vector<double> out;
  out.reserve(steps.size());
  for (std::size_t k : steps) {
    if (k >= traj.num_transitions()) throw ContractError("per_step_branch_rewards: step index outside the grid");
    const flow::StepMeta& meta = traj.steps[k];
    if (meta.kind != flow::StepKind::sde || !meta.eps)
      throw ContractError("per_step_branch_rewards: step " + std::to_string(k) + " has no stored noise");
    Matrix after = traj.states[k + 1].transpose();
    out.push_back(complete_and_score(model, after, k, schedule, reward)[0]);
  }
  return out;
}

}  // namespace tempflow::branching
