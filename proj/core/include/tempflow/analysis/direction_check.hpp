#pragma once

#include <cstddef>

#include "tempflow/common/rng.hpp"
#include "tempflow/common/types.hpp"
#include "tempflow/flowmodel/flow.hpp"
#include "tempflow/rewards/rewards.hpp"
#include "tempflow/stochastic/schedule.hpp"

namespace tempflow::analysis {

inline constexpr std::size_t kMinDirectionSamples = 1000;

struct DirectionOptions {
  std::size_t samples = 10000;
  // Multiplier on sigma_k sqrt(dk); small values keep the reward in its
  // first-order regime.
  double noise_scale = 0.01;
  double fd_step = 1e-4;
  double min_gradient_norm = 1e-10;
};

struct DirectionCheck {
  Vector g;            // gradient of R(ODE tail) at the transition mean
  Vector mc_estimate;  // mean of eps * normalized reward
  std::size_t samples = 0;
  double cosine = 0.0;
  double norm = 0.0;
};

// From x_k, take the transition-k kernel with its noise scaled down, complete
// with ODE steps, score, normalize the N rewards as one group, and average
// eps * advantage. The reference direction g comes from central finite
// differences of R(ODE tail(y)) at y = transition mean.
// Throws DegenerateError when |g| is below the threshold or the rewards are
// constant (normalization guard trips).
DirectionCheck direction_check(const flow::FlowModel& model, const rewards::RewardFn& reward, const Vector& x_k,
                               std::size_t k, const stochastic::NoiseSchedule& schedule,
                               const DirectionOptions& options, Rng& rng);

// Central finite-difference gradient of f at x.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h);

}  // namespace tempflow::analysis
