#pragma once

#include <cstddef>
#include <vector>

#include "tempflow/common/rng.hpp"
#include "tempflow/common/types.hpp"
#include "tempflow/flowmodel/flow.hpp"
#include "tempflow/flowmodel/trajectory.hpp"
#include "tempflow/stochastic/schedule.hpp"

namespace tempflow::stochastic {

// The transition mean is affine in the velocity:
//   mean = x - [v + sigma^2 / (2t) (x + (1 - t) v)] dt = alpha x - beta v
struct KernelCoefficients {
  double alpha;
  double beta;
};

KernelCoefficients kernel_coefficients(double t, double dt, double sigma);

// Mean of the Gaussian transition from state x at time t. The drift correction
// uses the actual t; sigma is supplied by the caller (normally the schedule's
// clamped value).
Vector transition_mean(const flow::FlowModel& model, const Vector& x, double t, double dt, double sigma);
Matrix transition_mean(const flow::FlowModel& model, const Matrix& x, double t, double dt, double sigma);
// Same, from a precomputed velocity.
Matrix transition_mean_from_velocity(const Matrix& x, const Matrix& v, double t, double dt, double sigma);

struct Transition {
  Vector x_from;
  Vector x_to;
  double t = 0.0;
  double dt = 0.0;
  Vector eps;
  Vector mean;
  double std_scalar = 0.0;  // sigma sqrt(dt)
};

Transition sde_step(const flow::FlowModel& model, const Vector& x, double t, double dt, double sigma,
                    const Vector& eps);
Transition sde_step(const flow::FlowModel& model, const Vector& x, const NoiseSchedule& schedule,
                    std::size_t i, const Vector& eps);

struct BatchTransition {
  Matrix mean;
  Matrix x_to;
  double std_scalar = 0.0;
};

BatchTransition sde_step(const flow::FlowModel& model, const Matrix& x, const NoiseSchedule& schedule,
                         std::size_t i, const Matrix& eps);

// Isotropic Gaussian log-density of x_to under N(mean, std_scalar^2 I).
double log_prob(const Vector& mean, double std_scalar, const Vector& x_to);
// Row-wise version.
Vector log_prob(const Matrix& mean, double std_scalar, const Matrix& x_to);

// dt / 2 (sigma (1 - t) / (2t) + 1 / sigma)^2, the factor multiplying
// |v_theta - v_ref|^2 in the KL between two transition kernels.
double kl_coefficient(double t, double dt, double sigma);

// KL(N(mu_theta, s^2 I) || N(mu_ref, s^2 I)) expressed through the velocities,
// with sigma = sigma(t, a, delta).
double kl_closed_form(const Vector& v_theta, const Vector& v_ref, double t, double dt, double a,
                      double delta = kDefaultDeltaClamp);

// Full SDE rollout with eps drawn from `rng`; every step carries eps and logp.
flow::Trajectory sde_sample(const flow::FlowModel& model, const Vector& x_T, const NoiseSchedule& schedule,
                            Rng& rng);

// Batched SDE rollout with caller-supplied noise: eps[i] holds the noise of
// transition i (same shape as x). Returns the final states.
Matrix sde_sample_batch(const flow::FlowModel& model, Matrix x, const NoiseSchedule& schedule,
                        const std::vector<Matrix>& eps);

}  // namespace tempflow::stochastic
