#pragma once

#include <cstdint>

#include "tempflow/autodiff/param_set.hpp"

namespace tempflow::ad {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::uint64_t step = 0;

  static AdamState for_params(const ParamSet& params);
};

// One bias-corrected Adam update, in place. Requires shape congruence between
// params, grads and state; lr must be >= 0 (lr = 0 is allowed and leaves params
// untouched while the moments still advance).
void adam_step(ParamSet& params, const GradSet& grads, AdamState& state, const AdamOptions& opt);

}  // namespace tempflow::ad
