#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "tempflow/common/types.hpp"
#include "tempflow/stochastic/schedule.hpp"

namespace tempflow::analysis {

struct StdNoiseRow {
  std::size_t step = 0;
  double t = 0.0;
  double noise_level = 0.0;
  double reward_std = 0.0;
};

struct StdNoiseReport {
  double correlation = 0.0;
  std::vector<StdNoiseRow> rows;
};

// Pearson correlation between a per-transition reward-std profile and
// sigma_t sqrt(dt). Throws DegenerateError if either series is constant.
StdNoiseReport std_vs_noise_report(const std::vector<double>& reward_std, const stochastic::NoiseSchedule& schedule);

// Columns: step_index, t, noise_level, reward_std.
void write_std_noise_csv(const std::filesystem::path& path, const StdNoiseReport& report);

struct SampleComparison {
  Vector mean_diff;   // mean(a) - mean(b)
  Matrix cov_diff;    // cov(a) - cov(b)
  double max_abs_moment_diff = 0.0;
  double energy_distance = 0.0;
};

// Moments on all rows; energy distance on the first `energy_rows` rows of each
// (all rows when 0).
SampleComparison compare_samples(const Matrix& a, const Matrix& b, std::size_t energy_rows = 0);

enum class Comparator { less, greater, less_equal, greater_equal };

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  Comparator comparator = Comparator::less;
  bool passed() const;
};

std::string to_string(Comparator c);

// Summary as JSON: one record {metric, value, threshold, comparator, pass} per check.
void write_summary(const std::filesystem::path& path, const std::vector<Check>& checks);

}  // namespace tempflow::analysis
