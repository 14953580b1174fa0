#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tempflow/autodiff/param_set.hpp"
#include "tempflow/autodiff/tape.hpp"
#include "tempflow/common/rng.hpp"
#include "tempflow/common/types.hpp"

namespace tempflow::ad {

enum class Activation : unsigned { tanh = 0, silu = 1 };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Feed-forward velocity network v(x, t). The input is x concatenated with a
// sinusoidal embedding of t: [sin(pi 2^j t), cos(pi 2^j t)] for j < time_freqs.
// Hidden layers carry a bias; the output layer does not.
class Network {
 public:
  Network(std::size_t state_dim, std::vector<std::size_t> hidden, Activation activation,
          std::size_t time_freqs = 4);

  std::size_t state_dim() const noexcept { return state_dim_; }
  std::size_t time_dim() const noexcept { return 2 * time_freqs_; }
  std::size_t time_freqs() const noexcept { return time_freqs_; }
  std::size_t input_dim() const noexcept { return state_dim_ + time_dim(); }
  Activation activation() const noexcept { return activation_; }
  const std::vector<std::size_t>& hidden() const noexcept { return hidden_; }
  // [input, hidden..., output]
  std::vector<std::size_t> layer_sizes() const;
  std::size_t num_layers() const noexcept { return hidden_.size() + 1; }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  ParamSet init_params(Rng& rng) const;
  ParamSet zero_params() const;
  // Throws ContractError when params do not match this architecture.
  void check_params(const ParamSet& params) const;

  Matrix time_embedding(std::span<const double> t) const;

  // Batched evaluation: rows of `x` are states, t[i] is the time of row i.
  Matrix forward(const ParamSet& params, const Matrix& x, std::span<const double> t) const;
  Matrix forward(const ParamSet& params, const Matrix& x, double t) const;
  Vector forward(const ParamSet& params, const Vector& x, double t) const;

  // Records parameters as tape leaves (slot = entry index).
  std::vector<Var> bind(Tape& tape, const ParamSet& params) const;
  Var forward(Tape& tape, std::span<const Var> bound, const Matrix& x,
              std::span<const double> t) const;
  // Collects the gradients of bound leaves into a GradSet shaped like `params`.
  GradSet gradients(std::span<const Var> bound, const ParamSet& params) const;

  bool operator==(const Network&) const = default;

 private:
  void check_input(const Matrix& x, std::span<const double> t) const;

  std::size_t state_dim_;
  std::vector<std::size_t> hidden_;
  Activation activation_;
  std::size_t time_freqs_;
};

}  // namespace tempflow::ad
