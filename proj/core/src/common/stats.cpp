#include "tempflow/common/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tempflow/common/errors.hpp"

namespace tempflow::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw ContractError("mean of empty series");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs) {
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) throw ContractError("sample std needs at least two values");
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw ContractError("pearson needs two series of equal length >= 2");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw DegenerateError("correlation undefined for a constant series");
  return sxy / std::sqrt(sxx * syy);
}

double coefficient_of_variation(std::span<const double> xs) {
  const double m = mean(xs);
  if (m == 0.0) throw DegenerateError("coefficient of variation undefined for zero mean");
  return population_std(xs) / std::abs(m);
}

double median(std::span<const double> xs) {
  if (xs.empty()) throw ContractError("median of empty series");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Vector column_mean(const Matrix& samples) { return samples.colwise().mean().transpose(); }

Matrix covariance(const Matrix& samples) {
  if (samples.rows() < 2) throw ContractError("covariance needs at least two samples");
  const Matrix centered = samples.rowwise() - samples.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(samples.rows() - 1);
}

namespace {

double mean_pair_distance(const Matrix& a, const Matrix& b) {
  const Eigen::Index d = a.cols();
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = a(i, k) - b(j, k);
        s += diff * diff;
      }
      row += std::sqrt(s);
    }
    total += row;
  }
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

double energy_distance(const Matrix& xs, const Matrix& ys) {
  if (xs.cols() != ys.cols()) throw ContractError("energy distance: dimension mismatch");
  if (xs.rows() == 0 || ys.rows() == 0) throw ContractError("energy distance: empty sample");
  return 2.0 * mean_pair_distance(xs, ys) - mean_pair_distance(xs, xs) - mean_pair_distance(ys, ys);
}

}  // namespace tempflow::stats
