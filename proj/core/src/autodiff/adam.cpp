#include "tempflow/autodiff/adam.hpp"

#include <cmath>

#include "tempflow/common/errors.hpp"

namespace tempflow::ad {

AdamState AdamState::for_params(const ParamSet& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParamSet& params, const GradSet& grads, AdamState& state, const AdamOptions& opt) {
  if (!params.congruent(grads) || !params.congruent(state.m) || !params.congruent(state.v))
    throw ContractError("adam_step: params, grads and state are not shape-congruent");
  if (!(opt.lr >= 0.0)) throw ContractError("adam_step: learning rate must be non-negative");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);

  for (std::size_t e = 0; e < params.size(); ++e) {
    auto& w = params[e].values;
    const auto& g = grads[e].values;
    auto& m = state.m[e].values;
    auto& v = state.v[e].values;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      // With beta = 0 the correction factors are exactly 1.
      const double mhat = c1 > 0.0 ? m[i] / c1 : m[i];
      const double vhat = c2 > 0.0 ? v[i] / c2 : v[i];
      w[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  }
}

}  // namespace tempflow::ad
