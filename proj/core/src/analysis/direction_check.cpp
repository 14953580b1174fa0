#include "tempflow/analysis/direction_check.hpp"

#include <cmath>

#include "tempflow/common/errors.hpp"
#include "tempflow/grpo/advantages.hpp"
#include "tempflow/stochastic/sde.hpp"

namespace tempflow::analysis {

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw ContractError("finite_difference_gradient: step must be positive");
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector hi = x;
    Vector lo = x;
    hi[i] += h;
    lo[i] -= h;
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

DirectionCheck direction_check(const flow::FlowModel& model, const rewards::RewardFn& reward, const Vector& x_k,
                               std::size_t k, const stochastic::NoiseSchedule& schedule,
                               const DirectionOptions& options, Rng& rng) {
  if (options.samples < kMinDirectionSamples) throw ContractError("direction_check: need at least 1000 samples");
  if (!(options.noise_scale > 0.0)) throw ContractError("direction_check: noise scale must be positive");
  if (k >= schedule.num_transitions()) throw ContractError("direction_check: step index outside the grid");
  if (static_cast<std::size_t>(x_k.size()) != model.state_dim())
    throw ContractError("direction_check: state dimension mismatch");

  const double std_scalar = options.noise_scale * schedule.noise_level(k);
  if (!(std_scalar > 0.0)) throw DegenerateError("direction_check: zero noise at the branch step");
  const Vector mean = stochastic::transition_mean(model, x_k, schedule.t(k), schedule.dt(k), schedule.sigma(k));

  auto tail_reward = [&](const Vector& y) {
    Matrix row = y.transpose();
    return reward(flow::ode_sample_batch(model, row, schedule, k + 1).row(0).transpose());
  };

  DirectionCheck out;
  out.samples = options.samples;
  out.g = finite_difference_gradient(tail_reward, mean, options.fd_step);
  const double g_norm = out.g.norm();
  if (!(g_norm >= options.min_gradient_norm)) throw DegenerateError("direction_check: reward gradient vanishes");

  const auto n = static_cast<Eigen::Index>(options.samples);
  const auto d = x_k.size();
  const Matrix eps = rng.normal_matrix(n, d);
  Matrix y = mean.transpose().replicate(n, 1) + std_scalar * eps;
  const Vector r = rewards::evaluate(reward, flow::ode_sample_batch(model, y, schedule, k + 1));

  const double mu = r.mean();
  const double sd = std::sqrt((r.array() - mu).square().mean());
  if (!(sd > grpo::kStdGuard)) throw DegenerateError("direction_check: rewards are constant (normalization guard)");
  const Vector adv = (r.array() - mu) / sd;

  out.mc_estimate = eps.transpose() * adv / static_cast<double>(n);
  out.norm = out.mc_estimate.norm();
  out.cosine = out.norm > 0.0 ? out.mc_estimate.dot(out.g) / (out.norm * g_norm) : 0.0;
  return out;
}

}  // namespace tempflow::analysis
