#pragma once

#include <span>

#include "tempflow/common/types.hpp"

namespace tempflow::stats {

double mean(std::span<const double> xs);
// Population (divide by n) standard deviation.
double population_std(std::span<const double> xs);
double sample_std(std::span<const double> xs);

// Pearson correlation. Throws DegenerateError if either series is constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

double coefficient_of_variation(std::span<const double> xs);

double median(std::span<const double> xs);

// Rows are samples.
Vector column_mean(const Matrix& samples);
// Sample covariance (n - 1 denominator).
Matrix covariance(const Matrix& samples);

// Squared energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| (V-statistic).
double energy_distance(const Matrix& xs, const Matrix& ys);

}  // namespace tempflow::stats
