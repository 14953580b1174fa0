#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "fixtures.hpp"
#include "tempflow/branching/branching.hpp"
#include "tempflow/common/errors.hpp"
#include "tempflow/common/stats.hpp"
#include "tempflow/grpo/advantages.hpp"
#include "tempflow/stochastic/sde.hpp"

using namespace tempflow;
using namespace tempflow::branching;
using stochastic::NoiseSchedule;
using stochastic::ScheduleParams;

namespace {

double population_std(const Matrix& col) {
  const double m = col.mean();
  return std::sqrt((col.array() - m).square().mean());
}

double mean_of(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += v[i];
  return s / static_cast<double>(hi - lo);
}

}  // namespace

TEST(BranchSpec, ValidationAndMembership) {
  EXPECT_NO_THROW(BranchSpec::single(3).validate(8));
  EXPECT_THROW(BranchSpec::single(8).validate(8), ContractError);
  EXPECT_THROW((BranchSpec{{}, BranchMode::single_branch}).validate(8), ContractError);
  EXPECT_THROW((BranchSpec{{1, 2}, BranchMode::single_branch}).validate(8), ContractError);
  EXPECT_THROW((BranchSpec{{2, 2}, BranchMode::per_step_branch_reward}).validate(8), ContractError);
  EXPECT_THROW((BranchSpec{{3, 1}, BranchMode::per_step_branch_reward}).validate(8), ContractError);
  const BranchSpec multi{{0, 4, 7}, BranchMode::per_step_branch_reward};
  EXPECT_NO_THROW(multi.validate(8));
  EXPECT_TRUE(multi.contains(4));
  EXPECT_FALSE(multi.contains(5));
}

TEST(BranchRollout, OnlyTheBranchStepIsStochastic) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule();
  const BranchRollout r = branch_rollout(m.model(), Vector{{0.2, -0.4}}, 2, Vector{{1.0, 0.5}}, s, m.reward());
  ASSERT_TRUE(r.trajectory.valid());
  for (std::size_t i = 0; i < s.num_transitions(); ++i) {
    const bool sde = r.trajectory.steps[i].kind == flow::StepKind::sde;
    EXPECT_EQ(sde, i == 2) << "transition " << i;
  }
  EXPECT_EQ(r.branch_index, 2u);
  EXPECT_EQ(*r.trajectory.steps[2].eps, r.eps_at_branch);
  EXPECT_TRUE(r.trajectory.steps[2].logp.has_value());
  EXPECT_EQ(r.reward, m.reward()(r.trajectory.final_state()));
}

TEST(BranchRollout, ZeroNoiseScaleReducesToOde) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule().with_noise_scale(0.0);
  const Vector x{{-0.7, 1.1}};
  const Vector ode = flow::ode_sample(m.model(), x, s).final_state();
  for (std::size_t k = 0; k < s.num_transitions(); ++k) {
    const BranchRollout r = branch_rollout(m.model(), x, k, Vector{{2.0, -3.0}}, s, m.reward());
    EXPECT_LT((r.trajectory.final_state() - ode).cwiseAbs().maxCoeff(), 1e-14) << "k = " << k;
  }
}

TEST(BranchRollout, ReplayIsBitwiseIdentical) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule();
  const Vector x{{0.9, 0.1}}, e{{-0.3, 1.7}};
  const BranchRollout a = branch_rollout(m.model(), x, 1, e, s, m.reward());
  const BranchRollout b = branch_rollout(m.model(), x, 1, e, s, m.reward());
  EXPECT_EQ(0, std::memcmp(a.trajectory.final_state().data(), b.trajectory.final_state().data(), 2 * sizeof(double)));
  EXPECT_EQ(0, std::memcmp(&a.reward, &b.reward, sizeof(double)));
}

TEST(BranchRollout, FinalStateMovesContinuouslyWithNoise) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule();
  const Vector x{{0.05, 0.3}};
  const Vector base_eps{{0.2, -0.1}};
  const Vector dir = Vector{{1.0, 0.4}}.normalized();
  const Vector base = branch_rollout(m.model(), x, 1, base_eps, s, m.reward()).trajectory.final_state();
  double previous = 0.0;
  for (double step : {1e-4, 1e-3, 1e-2, 1e-1}) {
    const Vector moved =
        branch_rollout(m.model(), x, 1, Vector(base_eps + step * dir), s, m.reward()).trajectory.final_state();
    const double dist = (moved - base).norm();
    EXPECT_GT(dist, previous);
    EXPECT_LT(dist, 50.0 * step) << "eps step " << step;
    previous = dist;
  }
  EXPECT_GT(previous, 0.0);
}

TEST(BranchRollout, DimensionMismatchIsContractError) {
  const auto& m = tftest::two_gaussian_model();
  EXPECT_THROW(branch_rollout(m.model(), Vector::Zero(2), 0, Vector(Vector::Zero(3)), m.schedule(), m.reward()),
               ContractError);
}

TEST(GroupBranch, SharedNoiseGivesZeroVariance) {
  const auto& m = tftest::two_gaussian_model();
  const Vector x{{0.1, 0.2}};
  const std::vector<Vector> eps(8, Vector{{0.7, -1.2}});
  const grpo::RolloutGroup g = group_branch_rollouts(m.model(), x, 0, eps, m.schedule(), m.reward());
  ASSERT_EQ(g.rewards.rows(), 8);
  ASSERT_EQ(g.rewards.cols(), 1);
  for (Eigen::Index i = 1; i < 8; ++i) EXPECT_EQ(g.rewards(i, 0), g.rewards(0, 0));
  EXPECT_EQ(population_std(g.rewards), 0.0);
  const auto adv = grpo::compute_advantages({g.rewards}, grpo::AdvantageMode::groupwise_std);
  EXPECT_EQ(adv[0].cwiseAbs().maxCoeff(), 0.0);
}

TEST(GroupBranch, SeededGroupSharesStartAndVariesNoise) {
  const auto& m = tftest::two_gaussian_model();
  const Rng rng(11);
  const grpo::RolloutGroup g = group_branch_rollouts(m.model(), 3, 0, 6, rng, m.schedule(), m.reward());
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g.condition, 3u);
  EXPECT_EQ(g.reward_steps, std::vector<std::size_t>{0});
  const Vector x_T = condition_noise(rng, 3, 2);
  for (const auto& tr : g.rollouts) EXPECT_EQ(tr.states.front(), x_T);
  EXPECT_NE(*g.rollouts[0].steps[0].eps, *g.rollouts[1].steps[0].eps);
  EXPECT_GT(population_std(g.rewards), 0.0);
  const grpo::RolloutGroup again = group_branch_rollouts(m.model(), 3, 0, 6, rng, m.schedule(), m.reward());
  EXPECT_EQ(again.rewards, g.rewards);
}

TEST(GroupBranch, EarlyBranchVariesMoreThanLate) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule();
  const Rng rng(12);
  double early = 0.0, late = 0.0;
  for (std::size_t c = 0; c < 10; ++c) {
    early += population_std(group_branch_rollouts(m.model(), c, 0, 24, rng, s, m.reward()).rewards);
    late += population_std(
        group_branch_rollouts(m.model(), c, s.num_transitions() - 1, 24, rng, s, m.reward()).rewards);
  }
  EXPECT_GT(early, late);
}

TEST(GroupBranch, ConstantRewardGivesZeroAdvantages) {
  const auto& m = tftest::two_gaussian_model();
  const grpo::RolloutGroup g =
      group_branch_rollouts(m.model(), 0, 0, 8, Rng(13), m.schedule(), rewards::constant_reward(4.0));
  const auto adv = grpo::compute_advantages({g.rewards}, grpo::AdvantageMode::groupwise_std);
  EXPECT_EQ(adv[0].cwiseAbs().maxCoeff(), 0.0);
}

TEST(GroupBranch, GroupOfOneIsContractError) {
  const auto& m = tftest::two_gaussian_model();
  EXPECT_THROW(group_branch_rollouts(m.model(), 0, 0, 1, Rng(1), m.schedule(), m.reward()), ContractError);
  EXPECT_THROW(group_branch_rollouts(m.model(), Vector::Zero(2), 0, {Vector(Vector::Zero(2))}, m.schedule(), m.reward()),
               ContractError);
}

TEST(StdProfile, ZeroNoiseAndConstantRewardGiveZeros) {
  const auto& m = tftest::two_gaussian_model();
  const StdProfile quiet = reward_std_profile(m.model(), 4, 6, m.schedule().with_noise_scale(0.0), m.reward(), Rng(1));
  const StdProfile flat = reward_std_profile(m.model(), 4, 6, m.schedule(), rewards::constant_reward(1.0), Rng(1));
  ASSERT_EQ(quiet.reward_std.size(), m.schedule().num_transitions());
  for (std::size_t k = 0; k < quiet.reward_std.size(); ++k) {
    EXPECT_EQ(quiet.reward_std[k], 0.0);
    EXPECT_EQ(flat.reward_std[k], 0.0);
  }
}

TEST(StdProfile, MatchesPerConditionGroups) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule();
  const Rng rng(14);
  const StdProfile p = reward_std_profile(m.model(), 3, 5, s, m.reward(), rng);
  for (std::size_t k = 0; k < s.num_transitions(); ++k) {
    double expected = 0.0;
    for (std::size_t c = 0; c < 3; ++c)
      expected += population_std(group_branch_rollouts(m.model(), c, k, 5, rng, s, m.reward()).rewards);
    EXPECT_NEAR(p.reward_std[k], expected / 3.0, 1e-9) << "k = " << k;
  }
}

TEST(StdProfile, TrainedModelVarianceConcentratesEarly) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule();
  const StdProfile p = reward_std_profile(m.model(), 50, 24, s, m.reward(), Rng(15));
  const std::size_t T = s.num_transitions();
  const std::size_t third = T / 3;
  const double first = mean_of(p.reward_std, 0, third);
  const double last = mean_of(p.reward_std, T - third, T);
  EXPECT_GE(first, 2.0 * last) << "first third " << first << ", last third " << last;
  EXPECT_GT(p.reward_std.front(), p.reward_std.back());
  const StdProfile again = reward_std_profile(m.model(), 50, 24, s, m.reward(), Rng(15));
  EXPECT_EQ(again.reward_std, p.reward_std);
}

TEST(StdProfile, CsvColumns) {
  const auto& m = tftest::two_gaussian_model();
  const StdProfile p = reward_std_profile(m.model(), 2, 3, m.schedule(), m.reward(), Rng(1));
  const auto dir = tftest::scratch_dir("profile");
  write_profile_csv(dir / "p.csv", p);
  std::ifstream in(dir / "p.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "step_index,t,sigma,reward_std,reward_mean");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, m.schedule().num_transitions());
}

TEST(PerStepRewards, LastStepEqualsTerminalReward) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule();
  Rng rng(16);
  const flow::Trajectory tr = stochastic::sde_sample(m.model(), Vector{{0.4, 0.4}}, s, rng);
  const auto r = per_step_branch_rewards(m.model(), tr, s, m.reward(), {s.num_transitions() - 1});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0], m.reward()(tr.final_state()));
}

TEST(PerStepRewards, MatchIndependentRecomputation) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule();
  Rng rng(17);
  const flow::Trajectory tr = stochastic::sde_sample(m.model(), Vector{{-0.2, 0.6}}, s, rng);
  std::vector<std::size_t> all(s.num_transitions());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  const auto r = per_step_branch_rewards(m.model(), tr, s, m.reward(), all);
  double spread = 0.0;
  for (std::size_t k = 0; k < all.size(); ++k) {
    Vector x = tr.states[k];
    x = stochastic::sde_step(m.model(), x, s, k, *tr.steps[k].eps).x_to;
    for (std::size_t j = k + 1; j < s.num_transitions(); ++j) x = flow::ode_step(m.model(), x, s.t(j), s.dt(j));
    EXPECT_NEAR(r[k], m.reward()(x), 1e-12) << "k = " << k;
    spread = std::max(spread, std::abs(r[k] - r[0]));
  }
  EXPECT_GT(spread, 0.0);
}

TEST(PerStepRewards, ZeroNoiseGivesTheOdeReward) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule().with_noise_scale(0.0);
  const Vector x{{1.2, -0.5}};
  Rng rng(18);
  const flow::Trajectory tr = stochastic::sde_sample(m.model(), x, s, rng);
  const double ode = m.reward()(flow::ode_sample(m.model(), x, s).final_state());
  for (double r : per_step_branch_rewards(m.model(), tr, s, m.reward(), {0, 3, 7})) EXPECT_NEAR(r, ode, 1e-12);
}

TEST(PerStepRewards, MissingNoiseIsContractError) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule();
  const flow::Trajectory ode = flow::ode_sample(m.model(), Vector{{0.0, 1.0}}, s);
  EXPECT_THROW(per_step_branch_rewards(m.model(), ode, s, m.reward(), {2}), ContractError);
  Rng rng(19);
  const flow::Trajectory sde = stochastic::sde_sample(m.model(), Vector{{0.0, 1.0}}, s, rng);
  EXPECT_THROW(per_step_branch_rewards(m.model(), sde, s, m.reward(), {s.num_transitions()}), ContractError);
}
