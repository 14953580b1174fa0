#include "tempflow/grpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>

#include "tempflow/autodiff/adam.hpp"
#include "tempflow/autodiff/checkpoint.hpp"
#include "tempflow/branching/branching.hpp"
#include "tempflow/common/csv.hpp"
#include "tempflow/common/errors.hpp"
#include "tempflow/common/stats.hpp"
#include "tempflow/flowmodel/flow.hpp"
#include "tempflow/grpo/policy_loss.hpp"
#include "tempflow/stochastic/sde.hpp"

namespace tempflow::grpo {

std::string to_string(BranchTraining mode) {
  switch (mode) {
    case BranchTraining::none: return "none";
    case BranchTraining::single_branch: return "single_branch";
    case BranchTraining::per_step_branch_reward: return "per_step_branch_reward";
  }
  throw ContractError("unknown branch mode");
}

BranchTraining branch_training_from_string(const std::string& name) {
  if (name == "none") return BranchTraining::none;
  if (name == "single_branch") return BranchTraining::single_branch;
  if (name == "per_step_branch_reward") return BranchTraining::per_step_branch_reward;
  throw ConfigError("unknown branch mode '" + name + "'", "grpo.branch_mode");
}

void GrpoConfig::validate(std::size_t num_transitions) const {
  if (group_size < 2) throw ConfigError("group size must be >= 2", "grpo.group_size");
  if (num_groups < 1) throw ConfigError("need at least one group", "grpo.num_groups");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("must lie in (0, 1)", "grpo.clip_eps");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("must be finite and >= 0", "grpo.beta");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("must be finite and >= 0", "grpo.lr");
  if (inner_epochs < 1) throw ConfigError("must be >= 1", "grpo.inner_epochs");
  if (!(std_guard > 0.0)) throw ConfigError("must be positive", "grpo.std_guard");
  for (std::size_t j = 0; j < step_subset.size(); ++j) {
    if (step_subset[j] >= num_transitions) throw ConfigError("step index outside the grid", "grpo.step_subset");
    if (j > 0 && step_subset[j] <= step_subset[j - 1])
      throw ConfigError("steps must be strictly increasing", "grpo.step_subset");
  }
}

std::uint64_t hash_weights(const std::vector<double>& weights) {
  std::string bytes(weights.size() * sizeof(double), '\0');
  if (!weights.empty()) std::memcpy(bytes.data(), weights.data(), bytes.size());
  return fnv1a64(bytes);
}

EvalSnapshot evaluate_policy(const ad::Network& net, const ad::ParamSet& params,
                             const stochastic::NoiseSchedule& schedule, const rewards::RewardFn& reward,
                             const rewards::TargetFn& in_target, const Matrix& eval_noise) {
  const flow::FlowModel model(net, params);
  const Matrix x0 = flow::ode_sample_batch(model, eval_noise, schedule);
  const Vector r = rewards::evaluate(reward, x0);
  EvalSnapshot snap;
  snap.mean_reward = r.mean();
  snap.mode_occupancy = in_target ? rewards::occupancy(in_target, x0) : std::numeric_limits<double>::quiet_NaN();
  return snap;
}

namespace {

// One trained transition: N rows of (x, x_to) with per-row advantages.
struct TermBatch {
  std::size_t transition = 0;
  Matrix x;
  Matrix x_to;
  Matrix v_ref;
  Vector advantages;
  Vector old_logps;
};

struct Rollouts {
  std::vector<TermBatch> terms;
  double reward_std = 0.0;
  std::vector<double> step_reward_std;
};

double mean_group_std(const Vector& values, std::size_t group_size) {
  const std::size_t groups = static_cast<std::size_t>(values.size()) / group_size;
  double total = 0.0;
  for (std::size_t g = 0; g < groups; ++g)
    total += stats::population_std(std::span<const double>(values.data() + g * group_size, group_size));
  return total / static_cast<double>(groups);
}

// Splits an N x S reward matrix into groups, normalizes, and stacks back.
Matrix normalize(const Matrix& rewards, const GrpoConfig& cfg) {
  if (!rewards.allFinite()) throw NumericError("reward is not finite", "reward");
  const auto G = static_cast<Eigen::Index>(cfg.group_size);
  std::vector<Matrix> groups;
  for (std::size_t g = 0; g < cfg.num_groups; ++g)
    groups.push_back(rewards.middleRows(static_cast<Eigen::Index>(g) * G, G));
  const std::vector<Matrix> adv = compute_advantages(groups, cfg.adv_mode, cfg.std_guard);
  Matrix out(rewards.rows(), rewards.cols());
  for (std::size_t g = 0; g < cfg.num_groups; ++g) out.middleRows(static_cast<Eigen::Index>(g) * G, G) = adv[g];
  return out;
}

std::size_t choose_branch_step(const GrpoConfig& cfg, const stochastic::NoiseSchedule& schedule, std::size_t iter,
                               Rng& rng) {
  const std::size_t T = schedule.num_transitions();
  if (!cfg.early_bias) return iter % T;
  const std::vector<double> w = schedule.policy_weights();
  const double u = rng.uniform() * std::accumulate(w.begin(), w.end(), 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < T; ++k) {
    acc += w[k];
    if (u < acc) return k;
  }
  return T - 1;
}

Rollouts collect(const flow::FlowModel& model, const flow::FlowModel& ref, const GrpoConfig& cfg,
                 const stochastic::NoiseSchedule& schedule, const rewards::RewardFn& reward, std::size_t iter,
                 Rng& it_rng) {
  const std::size_t T = schedule.num_transitions();
  const auto d = static_cast<Eigen::Index>(model.state_dim());
  const auto N = static_cast<Eigen::Index>(cfg.group_size * cfg.num_groups);
  Rollouts out;

  if (cfg.branch_mode == BranchTraining::single_branch) {
    Rng step_rng = it_rng.derive("branch-step");
    const std::size_t k = choose_branch_step(cfg, schedule, iter, step_rng);
    const Matrix starts = it_rng.derive("x_T").normal_matrix(static_cast<Eigen::Index>(cfg.num_groups), d);
    Matrix x(N, d);
    for (Eigen::Index r = 0; r < N; ++r) x.row(r) = starts.row(r / static_cast<Eigen::Index>(cfg.group_size));
    for (std::size_t i = 0; i < k; ++i) x = flow::ode_step(model, x, schedule.t(i), schedule.dt(i));
    const Matrix eps = it_rng.derive("eps-step", k).normal_matrix(N, d);
    const Matrix after = stochastic::sde_step(model, x, schedule, k, eps).x_to;
    const Vector r = branching::complete_and_score(model, after, k, schedule, reward);
    const Matrix adv = normalize(r, cfg);
    out.terms.push_back({k, x, after, ref.velocity(x, schedule.t(k)), adv.col(0), {}});
    out.reward_std = mean_group_std(r, cfg.group_size);
    out.step_reward_std = {out.reward_std};
    return out;
  }

  std::vector<Matrix> states{it_rng.derive("x_T").normal_matrix(N, d)};
  for (std::size_t i = 0; i < T; ++i) {
    const Matrix eps = it_rng.derive("eps-step", i).normal_matrix(N, d);
    states.push_back(stochastic::sde_step(model, states.back(), schedule, i, eps).x_to);
  }
  const Vector terminal = rewards::evaluate(reward, states.back());
  out.reward_std = mean_group_std(terminal, cfg.group_size);

  if (cfg.branch_mode == BranchTraining::none) {
    const Matrix adv = normalize(terminal, cfg);
    out.step_reward_std = {out.reward_std};
    for (std::size_t i = 0; i < T; ++i)
      out.terms.push_back({i, states[i], states[i + 1], ref.velocity(states[i], schedule.t(i)), adv.col(0), {}});
    return out;
  }

  std::vector<std::size_t> subset = cfg.step_subset;
  if (subset.empty()) {
    subset.resize(T);
    std::iota(subset.begin(), subset.end(), std::size_t{0});
  }
  Matrix r(N, static_cast<Eigen::Index>(subset.size()));
  for (std::size_t j = 0; j < subset.size(); ++j) {
    const std::size_t k = subset[j];
    r.col(static_cast<Eigen::Index>(j)) =
        k + 1 == T ? terminal : branching::complete_and_score(model, states[k + 1], k, schedule, reward);
    out.step_reward_std.push_back(mean_group_std(r.col(static_cast<Eigen::Index>(j)), cfg.group_size));
  }
  const Matrix adv = normalize(r, cfg);
  for (std::size_t j = 0; j < subset.size(); ++j) {
    const std::size_t k = subset[j];
    out.terms.push_back({k, states[k], states[k + 1], ref.velocity(states[k], schedule.t(k)),
                         adv.col(static_cast<Eigen::Index>(j)), {}});
  }
  return out;
}

struct EpochResult {
  double loss = 0.0;
  double kl = 0.0;
  ad::GradSet grads;
};

EpochResult run_epoch(const ad::Network& net, const ad::ParamSet& params, std::vector<TermBatch>& terms,
                      const std::vector<double>& weights, const GrpoConfig& cfg,
                      const stochastic::NoiseSchedule& schedule, bool record_old) {
  ad::Tape tape;
  const auto bound = net.bind(tape, params);
  const double inv_terms = 1.0 / static_cast<double>(terms.size());
  ad::Var total = tape.constant(Matrix::Zero(1, 1));
  double kl_sum = 0.0;
  for (TermBatch& term : terms) {
    const std::size_t i = term.transition;
    const double t = schedule.t(i);
    const double dt = schedule.dt(i);
    const double sigma = schedule.sigma(i);
    const double std_scalar = schedule.noise_level(i);
    if (!(std_scalar > 0.0))
      throw DegenerateError("training needs positive noise at transition " + std::to_string(i));
    const std::vector<double> tv(static_cast<std::size_t>(term.x.rows()), t);
    const ad::Var v = net.forward(tape, bound, term.x, tv);
    const auto [alpha, beta] = stochastic::kernel_coefficients(t, dt, sigma);
    const ad::Var logp = kernel_log_prob(v, term.x, term.x_to, alpha, beta, std_scalar);
    if (record_old) term.old_logps = logp.value().col(0);
    const Vector w = Vector::Constant(term.x.rows(), weights[i]);
    total = total + inv_terms * policy_loss(logp, term.old_logps, term.advantages, w, cfg.clip_eps);

    const double coeff = stochastic::kl_coefficient(t, dt, sigma);
    const ad::Var kl = coeff * ad::mean(ad::row_sum(ad::square(ad::cadd(v, -term.v_ref))));
    kl_sum += kl.value()(0, 0);
    if (cfg.beta > 0.0) total = total + (cfg.beta * inv_terms) * kl;
  }
  EpochResult res;
  res.loss = total.value()(0, 0);
  res.kl = kl_sum * inv_terms;
  if (!std::isfinite(res.loss)) throw NumericError("policy objective is not finite", "loss");
  tape.backward(total);
  res.grads = net.gradients(bound, params);
  ad::check_gradients_finite(res.grads);
  return res;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t iter) {
  char name[32];
  std::snprintf(name, sizeof name, "iter_%05zu.ckpt", iter);
  return dir / name;
}

}  // namespace

TrainResult train(const ad::Network& net, const ad::ParamSet& initial, const GrpoConfig& config,
                  const stochastic::NoiseSchedule& schedule, const rewards::RewardFn& reward,
                  const TrainOptions& options) {
  config.validate(schedule.num_transitions());
  net.check_params(initial);
  if (!reward) throw ContractError("train: reward function is empty");
  if (options.eval_samples < 1) throw ContractError("train: need at least one evaluation sample");
  if (options.checkpoint_every > 0 && options.checkpoint_dir.empty())
    throw ContractError("train: checkpoint_every set without a checkpoint directory");

  const Rng root(options.seed);
  const Matrix eval_noise =
      root.derive("eval").normal_matrix(static_cast<Eigen::Index>(options.eval_samples),
                                        static_cast<Eigen::Index>(net.state_dim()));
  const std::vector<double> weights = policy_weights(schedule, config.weight_mode);
  const std::uint64_t weight_hash = hash_weights(weights);

  TrainResult result;
  result.params = initial;
  const ad::ParamSet reference = initial;
  const flow::FlowModel ref_model(net, reference);
  ad::AdamState adam = ad::AdamState::for_params(result.params);
  const ad::AdamOptions adam_opt{.lr = config.lr};
  result.initial = evaluate_policy(net, result.params, schedule, reward, options.in_target, eval_noise);
  result.final_eval = result.initial;

  for (std::size_t it = 0; it < options.iterations; ++it) {
    try {
      Rng it_rng = root.derive("iteration", it);
      const flow::FlowModel model(net, result.params);
      Rollouts batch = collect(model, ref_model, config, schedule, reward, it, it_rng);

      IterationMetrics m;
      m.iter = it + 1;
      m.reward_std = batch.reward_std;
      m.step_reward_std = batch.step_reward_std;
      m.weight_hash = weight_hash;
      for (std::size_t epoch = 0; epoch < config.inner_epochs; ++epoch) {
        EpochResult er = run_epoch(net, result.params, batch.terms, weights, config, schedule, epoch == 0);
        if (epoch == 0) {
          m.loss = er.loss;
          m.kl = er.kl;
        }
        ad::adam_step(result.params, er.grads, adam, adam_opt);
      }
      if (!result.params.all_finite()) throw NumericError("parameters are not finite", "adam");

      const EvalSnapshot snap = evaluate_policy(net, result.params, schedule, reward, options.in_target, eval_noise);
      m.mean_reward = snap.mean_reward;
      m.mode_occupancy = snap.mode_occupancy;
      result.final_eval = snap;
      if (options.on_iteration) options.on_iteration(m);
      result.metrics.push_back(std::move(m));

      if (options.checkpoint_every > 0 && (it + 1) % options.checkpoint_every == 0) {
        std::filesystem::create_directories(options.checkpoint_dir);
        const auto path = checkpoint_path(options.checkpoint_dir, it + 1);
        ad::save_checkpoint(path, net, result.params);
        result.checkpoints.push_back(path);
      }
    } catch (const TrainingError&) {
      throw;
    } catch (const NumericError& e) {
      throw TrainingError(std::string(e.what()) + " (" + e.where() + ")", it + 1);
    }
  }
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<IterationMetrics>& metrics) {
  CsvWriter csv(path, {"iter", "mean_reward", "reward_std", "kl", "loss", "mode_occupancy"});
  for (const IterationMetrics& m : metrics)
    csv.row(static_cast<long long>(m.iter), {m.mean_reward, m.reward_std, m.kl, m.loss, m.mode_occupancy});
}

}  // namespace tempflow::grpo
