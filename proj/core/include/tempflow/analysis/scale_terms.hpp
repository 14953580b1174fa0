#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "tempflow/autodiff/network.hpp"
#include "tempflow/autodiff/param_set.hpp"
#include "tempflow/common/rng.hpp"
#include "tempflow/rewards/rewards.hpp"
#include "tempflow/stochastic/schedule.hpp"

namespace tempflow::analysis {

// Without reweighting: sqrt(dk (1 - k) / k) at k clamped to [delta, 1 - delta].
// With reweighting: dk. Throws DomainError when k is outside [0, 1], dk <= 0, or
// the clamped k leaves (0, 1).
double scale_term(double k, double dk, bool reweighted, double delta = stochastic::kDefaultDeltaClamp);

// k-independent factor 1/a + a/2 multiplying both forms.
double scale_prefactor(double a);

struct ScaleProfile {
  std::vector<double> k;
  std::vector<double> dk;
  std::vector<double> raw_scale;
  std::vector<double> reweighted_scale;
  std::vector<double> empirical_norm;           // uniform weights; empty unless measured
  std::vector<double> empirical_weighted_norm;  // noise-aware weights; empty unless measured
};

ScaleProfile scale_profile(const stochastic::NoiseSchedule& schedule);

// Columns: step_index, k, dk, raw_scale, reweighted_scale, then the measured
// norm columns when present.
void write_scale_profile_csv(const std::filesystem::path& path, const ScaleProfile& profile);

struct GradientScaleOptions {
  std::size_t group_size = 24;
  std::size_t num_groups = 8;
  bool reweighted = false;
};

// Norm of the policy-loss gradient contributed by transition k alone: each
// group shares x_T, branches at k with independent noise, and the loss is the
// (noise-weighted when reweighted) surrogate at r = 1. Returns the norm
// averaged over groups. Draws come from `rng` by condition and step label.
double empirical_gradient_scale(const ad::Network& net, const ad::ParamSet& params, std::size_t k,
                                const rewards::RewardFn& reward, const stochastic::NoiseSchedule& schedule,
                                const GradientScaleOptions& options, const Rng& rng);

// empirical_gradient_scale for every transition of the grid.
std::vector<double> empirical_gradient_profile(const ad::Network& net, const ad::ParamSet& params,
                                               const rewards::RewardFn& reward,
                                               const stochastic::NoiseSchedule& schedule,
                                               const GradientScaleOptions& options, const Rng& rng);

}  // namespace tempflow::analysis
