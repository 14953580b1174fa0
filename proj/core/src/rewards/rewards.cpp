#include "tempflow/rewards/rewards.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "tempflow/common/errors.hpp"

namespace tempflow::rewards {

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::LLT<Matrix> factor(const Matrix& cov, std::size_t dim) {
  if (cov.rows() != static_cast<Eigen::Index>(dim) || cov.cols() != static_cast<Eigen::Index>(dim))
    throw ConfigError("covariance shape does not match the mean", "reward.cov");
  if (!cov.allFinite() || !cov.isApprox(cov.transpose()))
    throw ConfigError("covariance must be finite and symmetric", "reward.cov");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw ConfigError("covariance is not positive definite", "reward.cov");
  return llt;
}

double mahalanobis_half(const Eigen::LLT<Matrix>& llt, const Vector& x, const Vector& mean) {
  if (x.size() != mean.size()) throw ContractError("reward: state dimension mismatch");
  const Vector z = llt.matrixL().solve(x - mean);
  return -0.5 * z.squaredNorm();
}

}  // namespace

std::string to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::mode_density: return "mode_density";
    case RewardKind::linear: return "linear";
    case RewardKind::region: return "region";
  }
  throw ContractError("unknown reward kind");
}

RewardKind reward_kind_from_string(const std::string& name) {
  if (name == "mode_density") return RewardKind::mode_density;
  if (name == "linear") return RewardKind::linear;
  if (name == "region") return RewardKind::region;
  throw ConfigError("unknown reward kind '" + name + "'", "reward.kind");
}

void RewardSpec::validate() const {
  switch (kind) {
    case RewardKind::mode_density:
      if (mean.size() == 0 || !mean.allFinite()) throw ConfigError("mean must be a finite vector", "reward.mean");
      factor(cov, static_cast<std::size_t>(mean.size()));
      return;
    case RewardKind::linear:
      if (direction.size() == 0 || !direction.allFinite()) throw ConfigError("direction must be finite", "reward.direction");
      if (!(direction.norm() > 0.0)) throw ConfigError("direction must be nonzero", "reward.direction");
      return;
    case RewardKind::region:
      if (lo.size() == 0 || lo.size() != hi.size()) throw ConfigError("box bounds must have equal, positive length", "reward.lo");
      if (!(lo.array() < hi.array()).all()) throw ConfigError("box must satisfy lo < hi in every coordinate", "reward.hi");
      if (!(width > 0.0) || !std::isfinite(width)) throw ConfigError("smoothing width must be positive", "reward.width");
      return;
  }
}

double mode_density_reward(const Vector& x, const Vector& mean, const Matrix& cov) {
  return mahalanobis_half(factor(cov, static_cast<std::size_t>(mean.size())), x, mean);
}

double linear_reward(const Vector& x, const Vector& u) {
  if (!(u.norm() > 0.0)) throw ConfigError("linear reward direction must be nonzero", "reward.direction");
  if (x.size() != u.size()) throw ContractError("linear_reward: dimension mismatch");
  return u.dot(x);
}

double region_reward(const Vector& x, const Vector& lo, const Vector& hi, double width) {
  if (x.size() != lo.size() || lo.size() != hi.size()) throw ContractError("region_reward: dimension mismatch");
  if (!(width > 0.0)) throw ContractError("region_reward: width must be positive");
  double r = 1.0;
  for (Eigen::Index k = 0; k < x.size(); ++k)
    r *= logistic((x[k] - lo[k]) / width) * logistic((hi[k] - x[k]) / width);
  return r;
}

RewardFn make_reward(const RewardSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case RewardKind::mode_density: {
      auto llt = factor(spec.cov, static_cast<std::size_t>(spec.mean.size()));
      return [llt, mean = spec.mean](const Vector& x) { return mahalanobis_half(llt, x, mean); };
    }
    case RewardKind::linear:
      return [u = spec.direction](const Vector& x) { return linear_reward(x, u); };
    case RewardKind::region:
      return [lo = spec.lo, hi = spec.hi, w = spec.width](const Vector& x) { return region_reward(x, lo, hi, w); };
  }
  throw ContractError("unknown reward kind");
}

RewardFn constant_reward(double value) {
  return [value](const Vector&) { return value; };
}

Vector evaluate(const RewardFn& reward, const Matrix& states) {
  Vector out(states.rows());
  for (Eigen::Index i = 0; i < states.rows(); ++i) out[i] = reward(states.row(i).transpose());
  return out;
}

TargetFn target_indicator(const RewardSpec& spec, const std::vector<Vector>& mode_centers) {
  spec.validate();
  switch (spec.kind) {
    case RewardKind::mode_density: {
      if (mode_centers.empty()) throw ContractError("target_indicator: no mode centers");
      auto nearest = [mode_centers](const Vector& x) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < mode_centers.size(); ++j) {
          const double d = (x - mode_centers[j]).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = j;
          }
        }
        return best;
      };
      const std::size_t target = nearest(spec.mean);
      return [nearest, target](const Vector& x) { return nearest(x) == target; };
    }
    case RewardKind::linear:
      return [u = spec.direction](const Vector& x) { return u.dot(x) > 0.0; };
    case RewardKind::region:
      return [lo = spec.lo, hi = spec.hi](const Vector& x) {
        return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
      };
  }
  throw ContractError("unknown reward kind");
}

double occupancy(const TargetFn& in_target, const Matrix& states) {
  if (states.rows() == 0) throw ContractError("occupancy: no states");
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < states.rows(); ++i)
    if (in_target(states.row(i).transpose())) ++hits;
  return static_cast<double>(hits) / static_cast<double>(states.rows());
}

}  // namespace tempflow::rewards
