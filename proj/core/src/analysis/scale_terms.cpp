#include "tempflow/analysis/scale_terms.hpp"

#include <cmath>

#include "tempflow/branching/branching.hpp"
#include "tempflow/common/csv.hpp"
#include "tempflow/common/errors.hpp"
#include "tempflow/grpo/advantages.hpp"
#include "tempflow/grpo/policy_loss.hpp"
#include "tempflow/stochastic/sde.hpp"

namespace tempflow::analysis {

double scale_term(double k, double dk, bool reweighted, double delta) {
  if (!(k >= 0.0 && k <= 1.0)) throw DomainError("scale_term: k must lie in [0, 1]");
  if (!(dk > 0.0) || !std::isfinite(dk)) throw DomainError("scale_term: dk must be positive");
  const double kc = stochastic::clamp_time(k, delta);
  if (!(kc > 0.0 && kc < 1.0)) throw DomainError("scale_term: clamped k outside (0, 1)");
  if (reweighted) return dk;
  return std::sqrt(dk * (1.0 - kc) / kc);
}

double scale_prefactor(double a) {
  if (!(a > 0.0)) throw DomainError("scale_prefactor: a must be positive");
  return 1.0 / a + a / 2.0;
}

ScaleProfile scale_profile(const stochastic::NoiseSchedule& schedule) {
  ScaleProfile p;
  const double delta = schedule.delta_clamp();
  for (std::size_t i = 0; i < schedule.num_transitions(); ++i) {
    p.k.push_back(schedule.t(i));
    p.dk.push_back(schedule.dt(i));
    p.raw_scale.push_back(scale_term(schedule.t(i), schedule.dt(i), false, delta));
    p.reweighted_scale.push_back(scale_term(schedule.t(i), schedule.dt(i), true, delta));
  }
  return p;
}

void write_scale_profile_csv(const std::filesystem::path& path, const ScaleProfile& profile) {
  std::vector<std::string> header{"step_index", "k", "dk", "raw_scale", "reweighted_scale"};
  const bool uniform = !profile.empirical_norm.empty();
  const bool weighted = !profile.empirical_weighted_norm.empty();
  if (uniform) header.push_back("empirical_norm");
  if (weighted) header.push_back("empirical_weighted_norm");
  CsvWriter csv(path, header);
  for (std::size_t i = 0; i < profile.k.size(); ++i) {
    std::vector<double> row{profile.k[i], profile.dk[i], profile.raw_scale[i], profile.reweighted_scale[i]};
    if (uniform) row.push_back(profile.empirical_norm.at(i));
    if (weighted) row.push_back(profile.empirical_weighted_norm.at(i));
    csv.row(static_cast<long long>(i), row);
  }
}

double empirical_gradient_scale(const ad::Network& net, const ad::ParamSet& params, std::size_t k,
                                const rewards::RewardFn& reward, const stochastic::NoiseSchedule& schedule,
                                const GradientScaleOptions& options, const Rng& rng) {
  if (options.group_size < 8) throw ContractError("empirical_gradient_scale: group size must be >= 8");
  if (options.num_groups < 1) throw ContractError("empirical_gradient_scale: need at least one group");
  if (k >= schedule.num_transitions()) throw ContractError("empirical_gradient_scale: step index outside the grid");
  const double std_scalar = schedule.noise_level(k);
  if (!(std_scalar > 0.0)) throw DegenerateError("empirical_gradient_scale: zero noise at the branch step");
  const double weight = options.reweighted ? grpo::noise_weights(schedule)[k] : 1.0;
  const flow::FlowModel model(net, params);
  const auto [alpha, beta] = stochastic::kernel_coefficients(schedule.t(k), schedule.dt(k), schedule.sigma(k));

  double total = 0.0;
  for (std::size_t c = 0; c < options.num_groups; ++c) {
    const grpo::RolloutGroup group =
        branching::group_branch_rollouts(model, c, k, options.group_size, rng, schedule, reward);
    const auto G = static_cast<Eigen::Index>(options.group_size);
    const auto d = static_cast<Eigen::Index>(net.state_dim());
    Matrix x(G, d);
    Matrix x_to(G, d);
    for (Eigen::Index j = 0; j < G; ++j) {
      const auto& traj = group.rollouts[static_cast<std::size_t>(j)];
      x.row(j) = traj.states[k].transpose();
      x_to.row(j) = traj.states[k + 1].transpose();
    }
    const Matrix adv = grpo::compute_advantages({group.rewards}, grpo::AdvantageMode::groupwise_std).front();

    ad::Tape tape;
    const auto bound = net.bind(tape, params);
    const std::vector<double> tv(static_cast<std::size_t>(G), schedule.t(k));
    const ad::Var v = net.forward(tape, bound, x, tv);
    const ad::Var logp = grpo::kernel_log_prob(v, x, x_to, alpha, beta, std_scalar);
    const Vector old = logp.value().col(0);
    const ad::Var loss = grpo::policy_loss(logp, old, adv.col(0), Vector::Constant(G, weight), 0.2);
    tape.backward(loss);
    total += net.gradients(bound, params).norm();
  }
  return total / static_cast<double>(options.num_groups);
}

std::vector<double> empirical_gradient_profile(const ad::Network& net, const ad::ParamSet& params,
                                               const rewards::RewardFn& reward,
                                               const stochastic::NoiseSchedule& schedule,
                                               const GradientScaleOptions& options, const Rng& rng) {
  std::vector<double> out;
  for (std::size_t k = 0; k < schedule.num_transitions(); ++k)
    out.push_back(empirical_gradient_scale(net, params, k, reward, schedule, options, rng));
  return out;
}

}  // namespace tempflow::analysis
