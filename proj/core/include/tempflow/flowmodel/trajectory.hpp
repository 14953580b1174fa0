#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "tempflow/common/types.hpp"

namespace tempflow::flow {

enum class StepKind { ode, sde };

struct StepMeta {
  StepKind kind = StepKind::ode;
  std::optional<Vector> eps;    // SDE only
  std::optional<double> logp;   // SDE only; absent when the kernel has zero noise
};

// Reverse-time trajectory x_T ... x_0. states[i] lives at times[i]; steps[i]
// describes the transition states[i] -> states[i + 1].
struct Trajectory {
  std::vector<Vector> states;
  std::vector<double> times;
  std::vector<StepMeta> steps;

  const Vector& initial() const { return states.front(); }
  const Vector& final_state() const { return states.back(); }
  std::size_t num_transitions() const noexcept { return steps.size(); }

  // Structural invariants: matching lengths, strictly decreasing times, eps on
  // every SDE step and on no ODE step.
  bool valid() const;
};

// One row per state: step index, t, x components.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

}  // namespace tempflow::flow
