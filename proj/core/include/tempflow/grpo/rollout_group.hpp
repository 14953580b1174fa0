#pragma once

#include <cstddef>
#include <vector>

#include "tempflow/common/types.hpp"
#include "tempflow/flowmodel/trajectory.hpp"

namespace tempflow::grpo {

// G rollouts sharing a condition. rewards has one row per rollout and one
// column per reward cohort: a single column for terminal rewards, or one
// column per rewarded transition (listed in reward_steps) for per-step
// branch rewards. Old log-probabilities live in each trajectory's step
// metadata.
struct RolloutGroup {
  std::size_t condition = 0;
  std::vector<flow::Trajectory> rollouts;
  Matrix rewards;
  Matrix advantages;
  std::vector<std::size_t> reward_steps;

  std::size_t size() const noexcept { return rollouts.size(); }
};

}  // namespace tempflow::grpo
