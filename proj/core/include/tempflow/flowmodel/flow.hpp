#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "tempflow/autodiff/network.hpp"
#include "tempflow/autodiff/param_set.hpp"
#include "tempflow/common/types.hpp"
#include "tempflow/flowmodel/data_spec.hpp"
#include "tempflow/flowmodel/trajectory.hpp"
#include "tempflow/stochastic/schedule.hpp"

namespace tempflow::flow {

// Batched velocity field: rows of x are states, all evaluated at time t.
using VelocityFn = std::function<Matrix(const Matrix& x, double t)>;

// Non-owning view of a velocity field. When built from a network the network
// and parameters must outlive the model.
class FlowModel {
 public:
  FlowModel(const ad::Network& net, const ad::ParamSet& params);
  FlowModel(VelocityFn fn, std::size_t state_dim);

  std::size_t state_dim() const noexcept { return dim_; }
  Matrix velocity(const Matrix& x, double t) const;
  Vector velocity(const Vector& x, double t) const;

 private:
  VelocityFn fn_;
  std::size_t dim_;
};

// x - v(x, t) dt. Requires dt > 0 and t - dt >= 0 (up to rounding).
Vector ode_step(const FlowModel& model, const Vector& x, double t, double dt);
Matrix ode_step(const FlowModel& model, const Matrix& x, double t, double dt);

Trajectory ode_sample(const FlowModel& model, const Vector& x_T,
                      const stochastic::NoiseSchedule& schedule);

// Integrates every row from times()[first] down to 0 and returns the final states.
Matrix ode_sample_batch(const FlowModel& model, Matrix x, const stochastic::NoiseSchedule& schedule,
                        std::size_t first = 0);

struct PretrainOptions {
  std::size_t steps = 6000;
  std::size_t batch = 256;
  double lr = 5e-4;
  bool cosine_decay = true;  // lr_i = lr (1 + cos(pi i / steps)) / 2
  std::uint64_t seed = 0;
};

struct PretrainResult {
  ad::ParamSet params;
  std::vector<double> losses;  // one per step
};

// Conditional flow matching on straight paths x_t = (1 - t) x0 + t x1 with
// target x1 - x0, x0 ~ data, x1 ~ N(0, I), t ~ U(0, 1). Adam optimizer.
// steps = 0 returns the seeded initialization.
// Throws TrainingError with the step index when the loss stops being finite.
PretrainResult cfm_pretrain(const ad::Network& net, const DataSpec& data, const PretrainOptions& opt);

}  // namespace tempflow::flow
