#include "tempflow/stochastic/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "tempflow/common/errors.hpp"

namespace tempflow::stochastic {

double clamp_time(double t, double delta) { return std::clamp(t, delta, 1.0 - delta); }

double sigma(double t, double a, double delta) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("sigma: t must lie in [0, 1]");
  if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("sigma: noise scale a must be finite and >= 0");
  if (!(delta >= 0.0 && delta < 0.5)) throw DomainError("sigma: clamp delta must lie in [0, 0.5)");
  const double tc = clamp_time(t, delta);
  if (!(tc > 0.0 && tc < 1.0)) throw DomainError("sigma: clamped t outside (0, 1)");
  return a * std::sqrt(tc / (1.0 - tc));
}

std::vector<double> shifted_grid(std::size_t num_steps, double shift) {
  if (num_steps < 1) throw ContractError("shifted_grid: need at least one step");
  if (!(shift >= 1.0) || !std::isfinite(shift)) throw ContractError("shifted_grid: shift must be >= 1");
  std::vector<double> grid(num_steps + 1);
  const double n = static_cast<double>(num_steps);
  for (std::size_t i = 0; i <= num_steps; ++i) {
    const double t = 1.0 - static_cast<double>(i) / n;
    grid[i] = shift * t / (1.0 + (shift - 1.0) * t);
  }
  grid.front() = 1.0;
  grid.back() = 0.0;
  return grid;
}

NoiseSchedule::NoiseSchedule(ScheduleParams params) : params_(params) {
  if (params_.num_steps < 1) throw ConfigError("need at least one step", "schedule.num_steps");
  if (!(params_.a >= 0.0) || !std::isfinite(params_.a)) throw ConfigError("must be finite and >= 0", "schedule.a");
  if (!(params_.shift >= 1.0)) throw ConfigError("must be >= 1", "schedule.shift");
  if (!(params_.delta_clamp > 0.0 && params_.delta_clamp < 0.5))
    throw ConfigError("must lie in (0, 0.5)", "schedule.delta_clamp");
  times_ = shifted_grid(params_.num_steps, params_.shift);
  const bool uniform = params_.shift == 1.0;
  const double uniform_dt = 1.0 / static_cast<double>(params_.num_steps);
  for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
    const double dt = uniform ? uniform_dt : times_[i] - times_[i + 1];
    if (!(dt > 0.0)) throw ConfigError("grid is not strictly decreasing", "schedule.shift");
    deltas_.push_back(dt);
    sigmas_.push_back(stochastic::sigma(times_[i], params_.a, params_.delta_clamp));
  }
}

double NoiseSchedule::noise_level(std::size_t i) const { return sigma(i) * std::sqrt(dt(i)); }

std::vector<double> NoiseSchedule::noise_levels() const {
  std::vector<double> out(num_transitions());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = noise_level(i);
  return out;
}

std::vector<double> NoiseSchedule::policy_weights() const {
  std::vector<double> w = noise_levels();
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0)) throw DegenerateError("policy_weights: every noise level is zero");
  const double mean = total / static_cast<double>(w.size());
  for (double& v : w) v /= mean;
  return w;
}

NoiseSchedule NoiseSchedule::with_noise_scale(double a) const {
  ScheduleParams p = params_;
  p.a = a;
  return NoiseSchedule(p);
}

}  // namespace tempflow::stochastic
