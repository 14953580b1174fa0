#include "tempflow/stochastic/sde.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tempflow/common/errors.hpp"

namespace tempflow::stochastic {

namespace {

void check_kernel_args(double t, double dt, double sigma) {
  if (!(t > 0.0 && t <= 1.0)) throw DomainError("transition: t must lie in (0, 1]");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("transition: dt must be positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("transition: sigma must be finite and >= 0");
}

Matrix as_row(const Vector& x) { return x.transpose(); }

}  // namespace

KernelCoefficients kernel_coefficients(double t, double dt, double sigma) {
  check_kernel_args(t, dt, sigma);
  const double c = sigma * sigma / (2.0 * t);
  return {1.0 - c * dt, (1.0 + c * (1.0 - t)) * dt};
}

Matrix transition_mean_from_velocity(const Matrix& x, const Matrix& v, double t, double dt, double sigma) {
  check_kernel_args(t, dt, sigma);
  if (x.rows() != v.rows() || x.cols() != v.cols()) throw ContractError("transition_mean: shape mismatch");
  const double c = sigma * sigma / (2.0 * t);
  Matrix mean = x - (v + c * (x + (1.0 - t) * v)) * dt;
  if (!mean.allFinite())
    throw NumericError("transition mean is not finite", "t=" + std::to_string(t));
  return mean;
}

Matrix transition_mean(const flow::FlowModel& model, const Matrix& x, double t, double dt, double sigma) {
  check_kernel_args(t, dt, sigma);
  return transition_mean_from_velocity(x, model.velocity(x, t), t, dt, sigma);
}

Vector transition_mean(const flow::FlowModel& model, const Vector& x, double t, double dt, double sigma) {
  return transition_mean(model, as_row(x), t, dt, sigma).row(0).transpose();
}

Transition sde_step(const flow::FlowModel& model, const Vector& x, double t, double dt, double sigma,
                    const Vector& eps) {
  if (eps.size() != x.size()) throw ContractError("sde_step: eps dimension does not match x");
  Transition tr;
  tr.x_from = x;
  tr.t = t;
  tr.dt = dt;
  tr.eps = eps;
  tr.mean = transition_mean(model, x, t, dt, sigma);
  tr.std_scalar = sigma * std::sqrt(dt);
  tr.x_to = tr.mean + tr.std_scalar * eps;
  if (!tr.x_to.allFinite()) throw NumericError("sde_step produced a non-finite state", "t=" + std::to_string(t));
  return tr;
}

Transition sde_step(const flow::FlowModel& model, const Vector& x, const NoiseSchedule& schedule,
                    std::size_t i, const Vector& eps) {
  return sde_step(model, x, schedule.t(i), schedule.dt(i), schedule.sigma(i), eps);
}

BatchTransition sde_step(const flow::FlowModel& model, const Matrix& x, const NoiseSchedule& schedule,
                         std::size_t i, const Matrix& eps) {
  if (eps.rows() != x.rows() || eps.cols() != x.cols()) throw ContractError("sde_step: eps shape does not match x");
  BatchTransition tr;
  tr.mean = transition_mean(model, x, schedule.t(i), schedule.dt(i), schedule.sigma(i));
  tr.std_scalar = schedule.noise_level(i);
  tr.x_to = tr.mean + tr.std_scalar * eps;
  if (!tr.x_to.allFinite()) throw NumericError("sde_step produced a non-finite state", "transition " + std::to_string(i));
  return tr;
}

double log_prob(const Vector& mean, double std_scalar, const Vector& x_to) {
  if (!(std_scalar > 0.0)) throw DomainError("log_prob: std must be positive");
  if (mean.size() != x_to.size()) throw ContractError("log_prob: dimension mismatch");
  const double var = std_scalar * std_scalar;
  const double d = static_cast<double>(mean.size());
  return -0.5 * d * std::log(2.0 * std::numbers::pi * var) - (x_to - mean).squaredNorm() / (2.0 * var);
}

Vector log_prob(const Matrix& mean, double std_scalar, const Matrix& x_to) {
  if (!(std_scalar > 0.0)) throw DomainError("log_prob: std must be positive");
  if (mean.rows() != x_to.rows() || mean.cols() != x_to.cols()) throw ContractError("log_prob: shape mismatch");
  const double var = std_scalar * std_scalar;
  const double d = static_cast<double>(mean.cols());
  const double norm = -0.5 * d * std::log(2.0 * std::numbers::pi * var);
  return (norm - (x_to - mean).rowwise().squaredNorm().array() / (2.0 * var)).matrix();
}

double kl_coefficient(double t, double dt, double sigma) {
  check_kernel_args(t, dt, sigma);
  if (!(sigma > 0.0)) throw DomainError("kl: sigma must be positive");
  const double f = sigma * (1.0 - t) / (2.0 * t) + 1.0 / sigma;
  return 0.5 * dt * f * f;
}

double kl_closed_form(const Vector& v_theta, const Vector& v_ref, double t, double dt, double a, double delta) {
  if (v_theta.size() != v_ref.size()) throw ContractError("kl_closed_form: dimension mismatch");
  return kl_coefficient(t, dt, sigma(t, a, delta)) * (v_theta - v_ref).squaredNorm();
}

flow::Trajectory sde_sample(const flow::FlowModel& model, const Vector& x_T, const NoiseSchedule& schedule,
                            Rng& rng) {
  if (!x_T.allFinite()) throw ContractError("sde_sample: x_T must be finite");
  flow::Trajectory traj;
  traj.times = schedule.times();
  traj.states.push_back(x_T);
  for (std::size_t i = 0; i < schedule.num_transitions(); ++i) {
    const Vector eps = rng.normal_vector(x_T.size());
    const Transition tr = sde_step(model, traj.states.back(), schedule, i, eps);
    flow::StepMeta meta{flow::StepKind::sde, eps, std::nullopt};
    if (tr.std_scalar > 0.0) meta.logp = log_prob(tr.mean, tr.std_scalar, tr.x_to);
    traj.states.push_back(tr.x_to);
    traj.steps.push_back(std::move(meta));
  }
  return traj;
}

Matrix sde_sample_batch(const flow::FlowModel& model, Matrix x, const NoiseSchedule& schedule,
                        const std::vector<Matrix>& eps) {
  if (eps.size() != schedule.num_transitions()) throw ContractError("sde_sample_batch: need one noise matrix per transition");
  for (std::size_t i = 0; i < schedule.num_transitions(); ++i) x = sde_step(model, x, schedule, i, eps[i]).x_to;
  return x;
}

}  // namespace tempflow::stochastic
