#pragma once

#include <span>
#include <string>
#include <vector>

#include "tempflow/common/types.hpp"
#include "tempflow/stochastic/schedule.hpp"

namespace tempflow::grpo {

inline constexpr double kStdGuard = 1e-8;

enum class AdvantageMode { groupwise_std, global_std };

std::string to_string(AdvantageMode mode);
AdvantageMode advantage_mode_from_string(const std::string& name);

// Each entry of `rewards` is one group (rows = rollouts, columns = cohorts;
// every group has the same number of columns). Within a column the group mean
// is subtracted; the divisor is max(std, guard), with std the population std
// of that group's column (groupwise_std) or of that column pooled over every
// group (global_std).
std::vector<Matrix> compute_advantages(const std::vector<Matrix>& rewards, AdvantageMode mode,
                                       double guard = kStdGuard);

// Single group, single cohort.
std::vector<double> compute_advantages(std::span<const double> rewards, double guard = kStdGuard);

enum class WeightMode { uniform, noise_aware };

std::string to_string(WeightMode mode);
WeightMode weight_mode_from_string(const std::string& name);

// sigma_i sqrt(dt_i) normalized to mean 1 over transitions.
std::vector<double> noise_weights(const stochastic::NoiseSchedule& schedule);
std::vector<double> policy_weights(const stochastic::NoiseSchedule& schedule, WeightMode mode);

}  // namespace tempflow::grpo
