#include "tempflow/grpo/advantages.hpp"

#include <algorithm>
#include <cmath>

#include "tempflow/common/errors.hpp"
#include "tempflow/common/stats.hpp"

namespace tempflow::grpo {

std::string to_string(AdvantageMode mode) {
  return mode == AdvantageMode::groupwise_std ? "groupwise_std" : "global_std";
}

AdvantageMode advantage_mode_from_string(const std::string& name) {
  if (name == "groupwise_std") return AdvantageMode::groupwise_std;
  if (name == "global_std") return AdvantageMode::global_std;
  throw ConfigError("unknown advantage mode '" + name + "'", "grpo.adv_mode");
}

std::string to_string(WeightMode mode) { return mode == WeightMode::uniform ? "uniform" : "noise_aware"; }

WeightMode weight_mode_from_string(const std::string& name) {
  if (name == "uniform") return WeightMode::uniform;
  if (name == "noise_aware") return WeightMode::noise_aware;
  throw ConfigError("unknown weight mode '" + name + "'", "grpo.weight_mode");
}

namespace {

std::vector<double> column(const Matrix& m, Eigen::Index j) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, j);
  return out;
}

}  // namespace

std::vector<Matrix> compute_advantages(const std::vector<Matrix>& rewards, AdvantageMode mode, double guard) {
  if (rewards.empty()) throw ContractError("compute_advantages: no groups");
  if (!(guard > 0.0)) throw ContractError("compute_advantages: guard must be positive");
  const Eigen::Index cols = rewards.front().cols();
  for (const Matrix& g : rewards) {
    if (g.rows() < 2) throw ContractError("compute_advantages: every group needs at least two rewards");
    if (g.cols() != cols || cols == 0) throw ContractError("compute_advantages: groups disagree on cohort count");
    if (!g.allFinite()) throw ContractError("compute_advantages: rewards must be finite");
  }

  std::vector<double> pooled_std(static_cast<std::size_t>(cols), 0.0);
  if (mode == AdvantageMode::global_std) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      std::vector<double> all;
      for (const Matrix& g : rewards) {
        const auto c = column(g, j);
        all.insert(all.end(), c.begin(), c.end());
      }
      pooled_std[static_cast<std::size_t>(j)] = stats::population_std(all);
    }
  }

  std::vector<Matrix> out;
  out.reserve(rewards.size());
  for (const Matrix& g : rewards) {
    Matrix adv(g.rows(), g.cols());
    for (Eigen::Index j = 0; j < cols; ++j) {
      // Deviations from the first reward; an all-equal column centers to exact zeros.
      auto c = column(g, j);
      const double anchor = c.front();
      for (double& v : c) v -= anchor;
      const double mu = stats::mean(c);
      const double sd = mode == AdvantageMode::groupwise_std ? stats::population_std(c)
                                                             : pooled_std[static_cast<std::size_t>(j)];
      const double denom = std::max(sd, guard);
      for (Eigen::Index i = 0; i < g.rows(); ++i) adv(i, j) = (c[static_cast<std::size_t>(i)] - mu) / denom;
    }
    out.push_back(std::move(adv));
  }
  return out;
}

std::vector<double> compute_advantages(std::span<const double> rewards, double guard) {
  Matrix g(static_cast<Eigen::Index>(rewards.size()), 1);
  for (std::size_t i = 0; i < rewards.size(); ++i) g(static_cast<Eigen::Index>(i), 0) = rewards[i];
  const Matrix adv = compute_advantages(std::vector<Matrix>{g}, AdvantageMode::groupwise_std, guard).front();
  return column(adv, 0);
}

std::vector<double> noise_weights(const stochastic::NoiseSchedule& schedule) { return schedule.policy_weights(); }

std::vector<double> policy_weights(const stochastic::NoiseSchedule& schedule, WeightMode mode) {
  if (mode == WeightMode::uniform) return std::vector<double>(schedule.num_transitions(), 1.0);
  return noise_weights(schedule);
}

}  // namespace tempflow::grpo
