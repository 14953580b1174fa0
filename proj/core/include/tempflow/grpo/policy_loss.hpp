#pragma once

#include <span>
#include <vector>

#include "tempflow/autodiff/network.hpp"
#include "tempflow/autodiff/tape.hpp"
#include "tempflow/common/types.hpp"
#include "tempflow/flowmodel/flow.hpp"

namespace tempflow::grpo {

// min(r A, clip(r, 1 - eps, 1 + eps) A).
double clipped_surrogate(double ratio, double advantage, double clip_eps);

// -(1/N) sum_i w_i min(r_i A_i, clip(r_i) A_i), r_i = exp(new_i - old_i), over
// the N (rollout, transition) terms of a batch. Throws NumericError naming the
// term whose ratio is not finite.
double policy_loss(std::span<const double> new_logps, std::span<const double> old_logps,
                   std::span<const double> advantages, std::span<const double> weights, double clip_eps);

// Tape form: new_logps is an N x 1 node; gradient flows only through it.
ad::Var policy_loss(ad::Var new_logps, const Vector& old_logps, const Vector& advantages, const Vector& weights,
                    double clip_eps);

// Gaussian log-density of x_to under the kernel whose mean is
// alpha x - beta v, as a function of the velocity node v (rows = terms).
ad::Var kernel_log_prob(ad::Var v, const Matrix& x, const Matrix& x_to, double alpha, double beta,
                        double std_scalar);

// States x (rows) about to take an SDE step at time t.
struct TransitionBatch {
  Matrix x;
  double t = 0.0;
  double dt = 0.0;
  double sigma = 0.0;
};

// Mean over every row of every batch of the closed-form KL between the
// policy's and the reference's transition kernels.
double kl_loss(const flow::FlowModel& policy, const flow::FlowModel& reference,
               const std::vector<TransitionBatch>& batches);

}  // namespace tempflow::grpo
