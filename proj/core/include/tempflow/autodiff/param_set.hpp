#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tempflow/common/types.hpp"

namespace tempflow::ad {

struct ParamEntry {
  std::string name;
  std::vector<std::size_t> shape;  // {rows, cols}; biases are {1, n}
  std::vector<double> values;      // row-major

  std::size_t size() const noexcept { return values.size(); }
  // Row-major view as an Eigen matrix copy (rows x cols).
  Matrix as_matrix() const;

  bool operator==(const ParamEntry&) const = default;
};

// Ordered, named collection of real arrays. Used both for parameters and for
// their gradients (GradSet) since the two are shape-congruent.
class ParamSet {
 public:
  ParamSet() = default;

  void add(std::string name, std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<ParamEntry>& entries() const noexcept { return entries_; }
  std::vector<ParamEntry>& entries() noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const ParamEntry& operator[](std::size_t i) const { return entries_.at(i); }
  ParamEntry& operator[](std::size_t i) { return entries_.at(i); }

  const ParamEntry& find(const std::string& name) const;

  std::size_t total_count() const;
  bool all_finite() const;
  bool congruent(const ParamSet& other) const;

  // Throws ContractError on duplicate names, bad shapes, empty set, non-finite values.
  void validate() const;

  // Same names/shapes, values zeroed.
  ParamSet zeros_like() const;

  double squared_norm() const;
  double norm() const;
  std::vector<double> flatten() const;
  void assign_flat(const std::vector<double>& flat);

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<ParamEntry> entries_;
};

using GradSet = ParamSet;

// Throws NumericError naming the first entry that holds a NaN/Inf.
void check_gradients_finite(const GradSet& grads);

}  // namespace tempflow::ad
