#include "tempflow/grpo/policy_loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tempflow/common/errors.hpp"
#include "tempflow/stochastic/sde.hpp"

namespace tempflow::grpo {

namespace {

void check_clip(double clip_eps) {
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ContractError("policy_loss: clip_eps must lie in (0, 1)");
}

}  // namespace

double clipped_surrogate(double ratio, double advantage, double clip_eps) {
  check_clip(clip_eps);
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double policy_loss(std::span<const double> new_logps, std::span<const double> old_logps,
                   std::span<const double> advantages, std::span<const double> weights, double clip_eps) {
  const std::size_t n = new_logps.size();
  if (n == 0) throw ContractError("policy_loss: empty batch");
  if (old_logps.size() != n || advantages.size() != n || weights.size() != n)
    throw ContractError("policy_loss: input lengths differ");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::exp(new_logps[i] - old_logps[i]);
    if (!std::isfinite(r)) throw NumericError("policy ratio is not finite", "transition " + std::to_string(i));
    total += weights[i] * clipped_surrogate(r, advantages[i], clip_eps);
  }
  return -total / static_cast<double>(n);
}

ad::Var policy_loss(ad::Var new_logps, const Vector& old_logps, const Vector& advantages, const Vector& weights,
                    double clip_eps) {
  check_clip(clip_eps);
  const Eigen::Index n = new_logps.rows();
  if (new_logps.cols() != 1 || n == 0) throw ContractError("policy_loss: new_logps must be N x 1");
  if (old_logps.size() != n || advantages.size() != n || weights.size() != n)
    throw ContractError("policy_loss: input lengths differ");
  const ad::Var r = ad::exp(ad::cadd(new_logps, -old_logps));
  const Matrix& rv = r.value();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isfinite(rv(i, 0))) throw NumericError("policy ratio is not finite", "transition " + std::to_string(i));
  const ad::Var unclipped = ad::cmul(r, advantages);
  const ad::Var clipped = ad::cmul(ad::clamp(r, 1.0 - clip_eps, 1.0 + clip_eps), advantages);
  return -ad::mean(ad::cmul(ad::minimum(unclipped, clipped), weights));
}

ad::Var kernel_log_prob(ad::Var v, const Matrix& x, const Matrix& x_to, double alpha, double beta,
                        double std_scalar) {
  if (!(std_scalar > 0.0)) throw DomainError("kernel_log_prob: std must be positive");
  if (v.rows() != x.rows() || v.cols() != x.cols() || x.rows() != x_to.rows() || x.cols() != x_to.cols())
    throw ContractError("kernel_log_prob: shape mismatch");
  const double var = std_scalar * std_scalar;
  const double d = static_cast<double>(x.cols());
  // x_to - mean = (x_to - alpha x) + beta v
  const ad::Var resid = ad::cadd(beta * v, x_to - alpha * x);
  const ad::Var sq = ad::row_sum(ad::square(resid));
  return (-1.0 / (2.0 * var)) * sq - 0.5 * d * std::log(2.0 * std::numbers::pi * var);
}

double kl_loss(const flow::FlowModel& policy, const flow::FlowModel& reference,
               const std::vector<TransitionBatch>& batches) {
  double total = 0.0;
  Eigen::Index count = 0;
  for (const TransitionBatch& b : batches) {
    const double c = stochastic::kl_coefficient(b.t, b.dt, b.sigma);
    const Matrix diff = policy.velocity(b.x, b.t) - reference.velocity(b.x, b.t);
    total += c * diff.rowwise().squaredNorm().sum();
    count += b.x.rows();
  }
  if (count == 0) throw ContractError("kl_loss: no transitions");
  return total / static_cast<double>(count);
}

}  // namespace tempflow::grpo
