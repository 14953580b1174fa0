#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tempflow/common/types.hpp"

namespace tempflow::rewards {

// Rewards consume a terminal state x_0 and return a finite scalar.
using RewardFn = std::function<double(const Vector& x)>;

enum class RewardKind { mode_density, linear, region };

std::string to_string(RewardKind kind);
RewardKind reward_kind_from_string(const std::string& name);

struct RewardSpec {
  RewardKind kind = RewardKind::mode_density;
  Vector mean;       // mode_density
  Matrix cov;        // mode_density
  Vector direction;  // linear
  Vector lo;         // region box
  Vector hi;
  double width = 0.1;  // region smoothing

  // Throws ConfigError (with the offending key) on invalid parameters.
  void validate() const;
};

// -1/2 (x - mean)^T cov^{-1} (x - mean): the Gaussian log-density shifted so
// its maximum is 0. Throws ConfigError if cov is not positive definite.
double mode_density_reward(const Vector& x, const Vector& mean, const Matrix& cov);

// u . x. Throws ConfigError for u = 0.
double linear_reward(const Vector& x, const Vector& u);

// prod_k s((x_k - lo_k) / w) s((hi_k - x_k) / w) with the logistic s.
double region_reward(const Vector& x, const Vector& lo, const Vector& hi, double width);

// Callable for a validated spec; mode_density factors the covariance once.
RewardFn make_reward(const RewardSpec& spec);
RewardFn constant_reward(double value);

// Reward of every row.
Vector evaluate(const RewardFn& reward, const Matrix& states);

// Membership test for the reward's target: the mode nearest the reward mean
// (among `mode_centers`) for mode_density, the box for region, and the
// half-space u . x > 0 for linear.
using TargetFn = std::function<bool(const Vector& x)>;
TargetFn target_indicator(const RewardSpec& spec, const std::vector<Vector>& mode_centers);

double occupancy(const TargetFn& in_target, const Matrix& states);

}  // namespace tempflow::rewards
