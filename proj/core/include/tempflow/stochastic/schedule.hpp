#pragma once

#include <cstddef>
#include <vector>

namespace tempflow::stochastic {

// The noise scale a is not pinned by the method; 0.7 is a common choice for
// flow-matching SDE samplers.
inline constexpr double kDefaultNoiseScale = 0.7;
// sigma(t) = a sqrt(t / (1 - t)) diverges at t = 1; it is evaluated at t
// clamped to [delta, 1 - delta].
inline constexpr double kDefaultDeltaClamp = 0.1;

struct ScheduleParams {
  std::size_t num_steps = 8;
  double a = kDefaultNoiseScale;
  double shift = 1.0;
  double delta_clamp = kDefaultDeltaClamp;

  bool operator==(const ScheduleParams&) const = default;
};

// a * sqrt(tc / (1 - tc)), tc = clamp(t, delta, 1 - delta).
// Throws DomainError when t is outside [0, 1], a < 0, or the clamped time is
// not strictly inside (0, 1).
double sigma(double t, double a, double delta = kDefaultDeltaClamp);

double clamp_time(double t, double delta);

// Uniform grid t_i = 1 - i/T warped by t -> shift t / (1 + (shift - 1) t).
// Returns T + 1 strictly decreasing times from 1 to 0.
std::vector<double> shifted_grid(std::size_t num_steps, double shift);

// Discretized generation grid with per-transition step sizes and noise levels.
// Transition i goes from times()[i] to times()[i + 1].
class NoiseSchedule {
 public:
  explicit NoiseSchedule(ScheduleParams params = {});

  const ScheduleParams& params() const noexcept { return params_; }
  std::size_t num_transitions() const noexcept { return deltas_.size(); }
  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<double>& deltas() const noexcept { return deltas_; }
  const std::vector<double>& sigmas() const noexcept { return sigmas_; }

  double t(std::size_t i) const { return times_.at(i); }
  double dt(std::size_t i) const { return deltas_.at(i); }
  double sigma(std::size_t i) const { return sigmas_.at(i); }
  // sigma_i * sqrt(dt_i): standard deviation of the injected noise.
  double noise_level(std::size_t i) const;
  std::vector<double> noise_levels() const;
  // noise_level(i) / mean_j noise_level(j); mean exactly 1 up to rounding.
  // Throws DegenerateError when every noise level is zero.
  std::vector<double> policy_weights() const;

  double a() const noexcept { return params_.a; }
  double delta_clamp() const noexcept { return params_.delta_clamp; }

  // Same grid with a different noise scale.
  NoiseSchedule with_noise_scale(double a) const;

 private:
  ScheduleParams params_;
  std::vector<double> times_;
  std::vector<double> deltas_;
  std::vector<double> sigmas_;
};

}  // namespace tempflow::stochastic
