#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tempflow/autodiff/checkpoint.hpp"
#include "tempflow/common/errors.hpp"
#include "tempflow/common/rng.hpp"
#include "tempflow/grpo/advantages.hpp"
#include "tempflow/grpo/policy_loss.hpp"
#include "tempflow/grpo/trainer.hpp"
#include "tempflow/harness/config.hpp"
#include "tempflow/harness/presets.hpp"
#include "tempflow/stochastic/sde.hpp"

using namespace tempflow;
using namespace tempflow::grpo;
using stochastic::NoiseSchedule;
using stochastic::ScheduleParams;

namespace {

Matrix column(std::initializer_list<double> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

TrainResult short_run(const GrpoConfig& cfg, std::size_t iterations, std::uint64_t seed = 1) {
  const auto& m = tftest::two_gaussian_model();
  return train(m.net, m.params, cfg, m.schedule(), m.reward(),
               {.iterations = iterations, .seed = seed, .eval_samples = 128, .in_target = m.in_target()});
}

}  // namespace

TEST(Advantages, ThreeRewardsUsePopulationStd) {
  const auto adv = compute_advantages(std::vector<double>{1.0, 2.0, 3.0});
  const double a = 1.0 / std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(adv[0], -a, 1e-15);
  EXPECT_EQ(adv[1], 0.0);
  EXPECT_NEAR(adv[2], a, 1e-15);
  EXPECT_NEAR(a, 1.224745, 1e-6);
}

TEST(Advantages, CohortsHaveZeroMeanAndUnitStd) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto groups = 1 + static_cast<std::size_t>(rng.uniform() * 6);
    const auto rows = 2 + static_cast<Eigen::Index>(rng.uniform() * 30);
    const auto cols = 1 + static_cast<Eigen::Index>(rng.uniform() * 4);
    std::vector<Matrix> rewards;
    for (std::size_t g = 0; g < groups; ++g)
      rewards.push_back(100.0 * rng.uniform() * rng.normal_matrix(rows, cols) + Matrix::Constant(rows, cols, 50.0 * rng.uniform()));
    for (AdvantageMode mode : {AdvantageMode::groupwise_std, AdvantageMode::global_std}) {
      const auto adv = compute_advantages(rewards, mode);
      for (const Matrix& a : adv)
        for (Eigen::Index j = 0; j < cols; ++j) {
          const double mean = a.col(j).mean();
          EXPECT_NEAR(mean, 0.0, 1e-9);
          if (mode == AdvantageMode::groupwise_std) {
            EXPECT_NEAR(std::sqrt((a.col(j).array() - mean).square().mean()), 1.0, 1e-6);
          }
        }
    }
  }
}

TEST(Advantages, GlobalModeSharesOnePooledStd) {
  // Group means 1 and 13, stds 1 and 3; pooled over {0, 2, 10, 16}: mean 7, variance 41.
  const std::vector<Matrix> rewards{column({0.0, 2.0}), column({10.0, 16.0})};
  const auto global = compute_advantages(rewards, AdvantageMode::global_std);
  const double s = std::sqrt(41.0);
  EXPECT_NEAR(global[0](0, 0), -1.0 / s, 1e-15);
  EXPECT_NEAR(global[0](1, 0), 1.0 / s, 1e-15);
  EXPECT_NEAR(global[1](0, 0), -3.0 / s, 1e-15);
  EXPECT_NEAR(global[1](1, 0), 3.0 / s, 1e-15);
  const auto local = compute_advantages(rewards, AdvantageMode::groupwise_std);
  for (const Matrix& a : local) {
    EXPECT_NEAR(a(0, 0), -1.0, 1e-15);
    EXPECT_NEAR(a(1, 0), 1.0, 1e-15);
  }
}

TEST(Advantages, GuardHandlesConstantGroups) {
  for (double c : {0.0, 0.1, -7.3, 1e6}) {
    const auto adv = compute_advantages(std::vector<double>(5, c));
    for (double a : adv) EXPECT_EQ(a, 0.0) << "constant " << c;
  }
  const auto tiny = compute_advantages(std::vector<double>{0.0, 1e-12}, 1e-8);
  EXPECT_NEAR(tiny[1] - tiny[0], 1e-12 / 1e-8, 1e-12);
}

TEST(Advantages, ContractViolations) {
  EXPECT_THROW(compute_advantages(std::vector<double>{1.0}), ContractError);
  EXPECT_THROW(compute_advantages({column({1.0, 2.0}), Matrix::Zero(2, 2)}, AdvantageMode::groupwise_std),
               ContractError);
  EXPECT_THROW(compute_advantages(std::vector<double>{1.0, 2.0}, 0.0), ContractError);
  EXPECT_THROW(advantage_mode_from_string("per_batch"), ConfigError);
  EXPECT_EQ(advantage_mode_from_string(to_string(AdvantageMode::global_std)), AdvantageMode::global_std);
}

TEST(NoiseWeights, StrictlyDecreasingOnUniformGrid) {
  const NoiseSchedule s(ScheduleParams{.num_steps = 8, .a = 1.0, .delta_clamp = 1e-3});
  const auto w = noise_weights(s);
  ASSERT_EQ(w.size(), 8u);
  for (std::size_t i = 1; i < w.size(); ++i) EXPECT_LT(w[i], w[i - 1]) << "transition " << i;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double direct = s.sigma(i) * std::sqrt(s.dt(i));
    EXPECT_NEAR(w[i] / w[0], direct / (s.sigma(0) * std::sqrt(s.dt(0))), 1e-14);
  }
}

TEST(NoiseWeights, MeanIsOneForEverySchedule) {
  for (std::size_t T : {1u, 2u, 5u, 8u, 20u, 64u})
    for (double shift : {1.0, 2.0, 3.0})
      for (double delta : {1e-3, 0.1}) {
        const auto w = noise_weights(NoiseSchedule(ScheduleParams{.num_steps = T, .a = 0.7, .shift = shift, .delta_clamp = delta}));
        double sum = 0.0;
        for (double x : w) sum += x;
        EXPECT_NEAR(sum / static_cast<double>(T), 1.0, 1e-12);
      }
}

TEST(NoiseWeights, SingleTransitionAndScaleInvariance) {
  EXPECT_EQ(noise_weights(NoiseSchedule(ScheduleParams{.num_steps = 1}))[0], 1.0);
  const NoiseSchedule s(ScheduleParams{.num_steps = 8, .a = 0.5, .shift = 3.0});
  const auto w1 = noise_weights(s), w2 = noise_weights(s.with_noise_scale(1.0));
  for (std::size_t i = 0; i < w1.size(); ++i) EXPECT_NEAR(w1[i], w2[i], 1e-15);
  EXPECT_THROW(noise_weights(s.with_noise_scale(0.0)), DegenerateError);
  EXPECT_EQ(policy_weights(s, WeightMode::uniform), std::vector<double>(8, 1.0));
  EXPECT_EQ(policy_weights(s, WeightMode::noise_aware), w1);
}

TEST(ClippedSurrogate, AllSixCasesMatchBruteForce) {
  const double eps = 0.2;
  for (double adv : {1.7, -0.6})
    for (double ratio : {0.5, 0.95, 1.0, 1.1, 1.6}) {
      EXPECT_EQ(clipped_surrogate(ratio, adv, eps), tftest::brute_force_surrogate(ratio, adv, eps))
          << "A " << adv << ", r " << ratio;
    }
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const double adv = rng.normal();
    const double ratio = std::exp(0.5 * rng.normal());
    const double e = 0.05 + 0.9 * rng.uniform();
    EXPECT_EQ(clipped_surrogate(ratio, adv, e), tftest::brute_force_surrogate(ratio, adv, e));
  }
  EXPECT_THROW(clipped_surrogate(1.0, 1.0, 0.0), ContractError);
  EXPECT_THROW(clipped_surrogate(1.0, 1.0, 1.0), ContractError);
}

TEST(PolicyLoss, UnitRatioGivesMinusMeanWeightedAdvantage) {
  const std::vector<double> logp{-1.0, 0.5, 2.0};
  const std::vector<double> adv{0.3, -1.2, 0.9}, w{0.5, 1.0, 1.5};
  const double expected = -(0.5 * 0.3 - 1.2 + 1.5 * 0.9) / 3.0;
  EXPECT_NEAR(policy_loss(logp, logp, adv, w, 0.2), expected, 1e-15);
}

TEST(PolicyLoss, ClipActiveAboveBand) {
  const double eps = 0.2;
  const std::vector<double> old{0.0}, adv{2.0}, w{1.0};
  const std::vector<double> fresh{std::log(1.0 + 2.0 * eps)};
  EXPECT_NEAR(policy_loss(fresh, old, adv, w, eps), -(1.0 + eps) * 2.0, 1e-15);
}

TEST(PolicyLoss, UniformWeightsMatchUnweightedReference) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t G = 2 + static_cast<std::size_t>(rng.uniform() * 10);
    const std::size_t T = 1 + static_cast<std::size_t>(rng.uniform() * 10);
    std::vector<std::vector<double>> nw(G), od(G), ad(G);
    std::vector<double> fn, fo, fa;
    for (std::size_t i = 0; i < G; ++i) {
      const double a = rng.normal();
      for (std::size_t t = 0; t < T; ++t) {
        od[i].push_back(rng.normal());
        nw[i].push_back(od[i].back() + 0.3 * rng.normal());
        ad[i].push_back(a);
        fn.push_back(nw[i].back());
        fo.push_back(od[i].back());
        fa.push_back(a);
      }
    }
    const std::vector<double> ones(fn.size(), 1.0);
    EXPECT_NEAR(policy_loss(fn, fo, fa, ones, 0.2), tftest::unweighted_group_loss(nw, od, ad, 0.2), 1e-12);
  }
}

TEST(PolicyLoss, NonFiniteRatioNamesTransition) {
  const std::vector<double> old{0.0, 0.0, 0.0}, adv{1.0, 1.0, 1.0}, w{1.0, 1.0, 1.0};
  const std::vector<double> fresh{0.0, 1000.0, 0.0};
  try {
    policy_loss(fresh, old, adv, w, 0.2);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.where(), "transition 1");
  }
  EXPECT_THROW(policy_loss(fresh, old, adv, std::vector<double>{1.0}, 0.2), ContractError);
}

TEST(PolicyLoss, TapeFormMatchesScalarFormAndDifferences) {
  Rng rng(4);
  const Eigen::Index n = 12;
  Vector old(n), adv(n), w(n), fresh(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    old[i] = rng.normal();
    adv[i] = rng.normal();
    w[i] = 0.5 + rng.uniform();
    fresh[i] = old[i] + 0.4 * rng.normal();
  }
  const double eps = 0.2;
  auto as_vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  ad::Tape tape;
  const ad::Var x = tape.parameter(Matrix(fresh), 0);
  const ad::Var loss = policy_loss(x, old, adv, w, eps);
  EXPECT_NEAR(loss.value()(0, 0), policy_loss(as_vec(fresh), as_vec(old), as_vec(adv), as_vec(w), eps), 1e-15);
  tape.backward(loss);
  const Matrix grad = x.grad();
  const auto fd = tftest::central_difference(
      [&](const std::vector<double>& p) { return policy_loss(p, as_vec(old), as_vec(adv), as_vec(w), eps); },
      as_vec(fresh), 1e-6);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = std::exp(fresh[i] - old[i]);
    if (std::abs(r - (1.0 - eps)) < 1e-4 || std::abs(r - (1.0 + eps)) < 1e-4) continue;
    EXPECT_NEAR(grad(i, 0), fd[static_cast<std::size_t>(i)], 1e-7) << "term " << i;
    const bool clipped = (adv[i] > 0 && r > 1.0 + eps) || (adv[i] < 0 && r < 1.0 - eps);
    if (clipped) {
      EXPECT_EQ(grad(i, 0), 0.0);
    }
  }
}

TEST(KernelLogProb, MatchesSamplerDensity) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule();
  Rng rng(5);
  const Matrix x = rng.normal_matrix(6, 2);
  for (std::size_t i : {0u, 3u, 7u}) {
    const auto tr = stochastic::sde_step(m.model(), x, s, i, rng.normal_matrix(6, 2));
    const auto [alpha, beta] = stochastic::kernel_coefficients(s.t(i), s.dt(i), s.sigma(i));
    ad::Tape tape;
    const ad::Var v = tape.constant(m.model().velocity(x, s.t(i)));
    const Matrix lp = kernel_log_prob(v, x, tr.x_to, alpha, beta, s.noise_level(i)).value();
    const Vector direct = stochastic::log_prob(tr.mean, tr.std_scalar, tr.x_to);
    for (Eigen::Index r = 0; r < 6; ++r) EXPECT_NEAR(lp(r, 0), direct[r], 1e-10);
  }
}

TEST(KlLoss, ZeroAtReferenceAndMatchesGaussianKl) {
  const auto& m = tftest::two_gaussian_model();
  const NoiseSchedule s = m.schedule();
  Rng rng(6);
  std::vector<TransitionBatch> batches;
  for (std::size_t i = 0; i < s.num_transitions(); ++i)
    batches.push_back({rng.normal_matrix(5, 2), s.t(i), s.dt(i), s.sigma(i)});
  EXPECT_EQ(kl_loss(m.model(), m.model(), batches), 0.0);

  ad::ParamSet moved = m.params;
  for (auto& e : moved.entries())
    for (double& v : e.values) v += 0.01 * rng.normal();
  const flow::FlowModel policy(m.net, moved);
  double direct = 0.0;
  int count = 0;
  for (const TransitionBatch& b : batches)
    for (Eigen::Index r = 0; r < b.x.rows(); ++r) {
      const Vector x = b.x.row(r).transpose();
      const Vector m1 = stochastic::transition_mean(policy, x, b.t, b.dt, b.sigma);
      const Vector m2 = stochastic::transition_mean(m.model(), x, b.t, b.dt, b.sigma);
      direct += tftest::direct_gaussian_kl(m1, m2, b.sigma * std::sqrt(b.dt));
      ++count;
    }
  EXPECT_NEAR(kl_loss(policy, m.model(), batches), direct / count, 1e-10 * direct / count);
}

TEST(KlLoss, PositiveAfterOneUpdate) {
  const auto& m = tftest::two_gaussian_model();
  const TrainResult r = short_run(GrpoConfig{.lr = 1e-3}, 1);
  EXPECT_EQ(r.metrics[0].kl, 0.0);
  const NoiseSchedule s = m.schedule();
  std::vector<TransitionBatch> batches{{Rng(7).normal_matrix(64, 2), s.t(0), s.dt(0), s.sigma(0)}};
  EXPECT_GT(kl_loss(flow::FlowModel(m.net, r.params), m.model(), batches), 0.0);
}

TEST(KlLoss, BetaEntersOnlyThroughThePenalty) {
  const TrainResult off = short_run(GrpoConfig{.beta = 0.0, .lr = 1e-3}, 3);
  const TrainResult on = short_run(GrpoConfig{.beta = 0.5, .lr = 1e-3}, 3);
  // At the reference the penalty and its gradient are exactly zero.
  EXPECT_EQ(off.metrics[0].loss, on.metrics[0].loss);
  EXPECT_EQ(off.metrics[0].mean_reward, on.metrics[0].mean_reward);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LT(std::abs(off.metrics[i].loss), 1e-12);
    EXPECT_NEAR(on.metrics[i].loss, 0.5 * on.metrics[i].kl, 1e-12);
  }
  EXPECT_GT(on.metrics[2].kl, 0.0);
}

TEST(Train, ZeroLearningRateLeavesParamsAndRewardUnchanged) {
  const auto& m = tftest::two_gaussian_model();
  const TrainResult r = short_run(GrpoConfig{.lr = 0.0}, 3);
  EXPECT_EQ(r.params, m.params);
  for (const auto& it : r.metrics) EXPECT_EQ(it.mean_reward, r.initial.mean_reward);
}

TEST(Train, DeterministicGivenSeed) {
  const GrpoConfig cfg{.branch_mode = BranchTraining::per_step_branch_reward, .lr = 1e-3};
  const TrainResult a = short_run(cfg, 3, 9), b = short_run(cfg, 3, 9);
  EXPECT_EQ(a.params, b.params);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.metrics[i].mean_reward, b.metrics[i].mean_reward);
    EXPECT_EQ(a.metrics[i].loss, b.metrics[i].loss);
    EXPECT_EQ(a.metrics[i].iter, i + 1);
  }
  const TrainResult c = short_run(cfg, 3, 10);
  EXPECT_NE(a.params, c.params);
}

TEST(Train, NonFiniteRewardAbortsWithIteration) {
  const auto& m = tftest::two_gaussian_model();
  // The initial evaluation and each iteration's evaluation score 128 states;
  // each iteration's rollouts score 64. Calls past two full iterations are NaN.
  auto calls = std::make_shared<std::size_t>(0);
  const rewards::RewardFn base = m.reward();
  const rewards::RewardFn poisoned = [calls, base](const Vector& x) {
    return ++*calls > 128 + 2 * (64 + 128) ? std::numeric_limits<double>::quiet_NaN() : base(x);
  };
  try {
    train(m.net, m.params, GrpoConfig{}, m.schedule(), poisoned, {.iterations = 5, .seed = 1, .eval_samples = 128});
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.index(), 3u);
  }
}

TEST(Train, DivergentStepAbortsWithIteration) {
  try {
    short_run(GrpoConfig{.lr = 1e300}, 4);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_GE(e.index(), 1u);
    EXPECT_LE(e.index(), 2u);
  }
}

TEST(Train, BranchModesReportCohorts) {
  const TrainResult single = short_run(GrpoConfig{.branch_mode = BranchTraining::single_branch, .lr = 1e-3}, 3);
  for (const auto& it : single.metrics) EXPECT_EQ(it.step_reward_std.size(), 1u);
  const TrainResult biased =
      short_run(GrpoConfig{.branch_mode = BranchTraining::single_branch, .early_bias = true, .lr = 1e-3}, 2);
  EXPECT_EQ(biased.metrics.size(), 2u);
  const TrainResult subset = short_run(
      GrpoConfig{.branch_mode = BranchTraining::per_step_branch_reward, .step_subset = {0, 3, 7}, .lr = 1e-3}, 2);
  for (const auto& it : subset.metrics) EXPECT_EQ(it.step_reward_std.size(), 3u);
  const TrainResult epochs = short_run(GrpoConfig{.lr = 1e-3, .inner_epochs = 3}, 2);
  EXPECT_TRUE(epochs.params.all_finite());
}

TEST(Train, ConfigValidationNamesKeys) {
  auto key_of = [](const GrpoConfig& c) {
    try {
      c.validate(8);
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("none");
  };
  EXPECT_EQ(key_of(GrpoConfig{}), "none");
  EXPECT_EQ(key_of(GrpoConfig{.group_size = 1}), "grpo.group_size");
  EXPECT_EQ(key_of(GrpoConfig{.clip_eps = 1.0}), "grpo.clip_eps");
  EXPECT_EQ(key_of(GrpoConfig{.beta = -1.0}), "grpo.beta");
  EXPECT_EQ(key_of(GrpoConfig{.step_subset = {3, 8}}), "grpo.step_subset");
  EXPECT_EQ(key_of(GrpoConfig{.step_subset = {3, 3}}), "grpo.step_subset");
}

TEST(Train, WeightHashTracksWeightMode) {
  const auto& m = tftest::two_gaussian_model();
  const TrainResult u = short_run(GrpoConfig{.lr = 0.0}, 1);
  const TrainResult n = short_run(GrpoConfig{.weight_mode = WeightMode::noise_aware, .lr = 0.0}, 1);
  EXPECT_EQ(u.metrics[0].weight_hash, hash_weights(policy_weights(m.schedule(), WeightMode::uniform)));
  EXPECT_EQ(n.metrics[0].weight_hash, hash_weights(noise_weights(m.schedule())));
  EXPECT_NE(u.metrics[0].weight_hash, n.metrics[0].weight_hash);
}

TEST(Train, CheckpointsAndMetricsCsv) {
  const auto& m = tftest::two_gaussian_model();
  const auto dir = tftest::scratch_dir("grpo-ckpt");
  const TrainResult r =
      train(m.net, m.params, GrpoConfig{.lr = 1e-3}, m.schedule(), m.reward(),
            {.iterations = 4, .seed = 2, .eval_samples = 64, .checkpoint_every = 2, .checkpoint_dir = dir / "ck"});
  ASSERT_EQ(r.checkpoints.size(), 2u);
  for (const auto& p : r.checkpoints) EXPECT_TRUE(std::filesystem::exists(p));
  EXPECT_EQ(ad::load_checkpoint(r.checkpoints.back(), m.net), r.params);

  write_metrics_csv(dir / "metrics.csv", r.metrics);
  std::ifstream in(dir / "metrics.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "iter,mean_reward,reward_std,kl,loss,mode_occupancy");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 4u);
}

TEST(Presets, DifferOnlyInVariantFields) {
  const harness::ExperimentConfig base = harness::default_config();
  const std::string base_text = harness::to_text(base);
  for (const std::string& name : harness::preset_names()) {
    harness::ExperimentConfig c = harness::expand_preset(base, name);
    c.grpo.adv_mode = base.grpo.adv_mode;
    c.grpo.weight_mode = base.grpo.weight_mode;
    c.grpo.branch_mode = base.grpo.branch_mode;
    EXPECT_EQ(harness::to_text(c), base_text) << name;
  }
  const auto a = harness::expand_preset(base, "flow-grpo").grpo;
  const auto b = harness::expand_preset(base, "flow-grpo-fixed").grpo;
  EXPECT_EQ(a.adv_mode, AdvantageMode::global_std);
  EXPECT_EQ(b.adv_mode, AdvantageMode::groupwise_std);
  GrpoConfig a2 = a;
  a2.adv_mode = b.adv_mode;
  EXPECT_EQ(a2, b);
  EXPECT_THROW(harness::expand_preset(base, "dpo"), ConfigError);
}

TEST(Train, TargetOccupancyRisesWithinBudget) {
  const auto& m = tftest::two_gaussian_model();
  const TrainResult r = train(m.net, m.params, m.config.grpo, m.schedule(), m.reward(),
                              {.iterations = 300, .seed = 0, .in_target = m.in_target()});
  EXPECT_NEAR(r.initial.mode_occupancy, 0.5, 0.1);
  EXPECT_GE(r.final_eval.mode_occupancy, 0.9);
  EXPECT_GT(r.final_eval.mean_reward, r.initial.mean_reward);
}
