#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "tempflow/common/types.hpp"

namespace tempflow {

// Seeded generator with labeled substreams. A run seeds one root Rng; every
// consumer derives its own stream by label (and optional index), so the draws
// seen by "rollout-17" do not depend on how many draws other consumers made or
// in what order they ran.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng derive(std::string_view label) const;
  Rng derive(std::string_view label, std::uint64_t index) const;

  std::uint64_t seed() const noexcept { return seed_; }

  double uniform();  // [0, 1)
  double normal();
  std::uint64_t next_u64();

  Vector normal_vector(Eigen::Index dim);
  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace tempflow
