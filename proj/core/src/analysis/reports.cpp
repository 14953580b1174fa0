#include "tempflow/analysis/reports.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "tempflow/common/csv.hpp"
#include "tempflow/common/errors.hpp"
#include "tempflow/common/stats.hpp"

namespace tempflow::analysis {

StdNoiseReport std_vs_noise_report(const std::vector<double>& reward_std, const stochastic::NoiseSchedule& schedule) {
  if (reward_std.size() != schedule.num_transitions())
    throw ContractError("std_vs_noise_report: profile length does not match the schedule");
  const std::vector<double> noise = schedule.noise_levels();
  StdNoiseReport report;
  report.correlation = stats::pearson(reward_std, noise);
  for (std::size_t i = 0; i < noise.size(); ++i) report.rows.push_back({i, schedule.t(i), noise[i], reward_std[i]});
  return report;
}

void write_std_noise_csv(const std::filesystem::path& path, const StdNoiseReport& report) {
  CsvWriter csv(path, {"step_index", "t", "noise_level", "reward_std"});
  for (const StdNoiseRow& r : report.rows) csv.row(static_cast<long long>(r.step), {r.t, r.noise_level, r.reward_std});
}

SampleComparison compare_samples(const Matrix& a, const Matrix& b, std::size_t energy_rows) {
  if (a.cols() != b.cols() || a.rows() < 2 || b.rows() < 2) throw ContractError("compare_samples: incompatible samples");
  SampleComparison out;
  out.mean_diff = stats::column_mean(a) - stats::column_mean(b);
  out.cov_diff = stats::covariance(a) - stats::covariance(b);
  out.max_abs_moment_diff = std::max(out.mean_diff.cwiseAbs().maxCoeff(), out.cov_diff.cwiseAbs().maxCoeff());
  const auto na = energy_rows == 0 ? a.rows() : std::min<Eigen::Index>(a.rows(), static_cast<Eigen::Index>(energy_rows));
  const auto nb = energy_rows == 0 ? b.rows() : std::min<Eigen::Index>(b.rows(), static_cast<Eigen::Index>(energy_rows));
  out.energy_distance = stats::energy_distance(a.topRows(na), b.topRows(nb));
  return out;
}

bool Check::passed() const {
  switch (comparator) {
    case Comparator::less: return value < threshold;
    case Comparator::greater: return value > threshold;
    case Comparator::less_equal: return value <= threshold;
    case Comparator::greater_equal: return value >= threshold;
  }
  return false;
}

std::string to_string(Comparator c) {
  switch (c) {
    case Comparator::less: return "<";
    case Comparator::greater: return ">";
    case Comparator::less_equal: return "<=";
    case Comparator::greater_equal: return ">=";
  }
  return "?";
}

void write_summary(const std::filesystem::path& path, const std::vector<Check>& checks) {
  nlohmann::json doc = nlohmann::json::array();
  for (const Check& c : checks)
    doc.push_back({{"metric", c.name},
                   {"value", c.value},
                   {"threshold", c.threshold},
                   {"comparator", to_string(c.comparator)},
                   {"pass", c.passed()}});
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace tempflow::analysis
