#include "tempflow/autodiff/network.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "tempflow/common/errors.hpp"

namespace tempflow::ad {

namespace {

std::string weight_name(std::size_t layer, std::size_t num_layers) {
  return layer + 1 == num_layers ? "out.weight" : "l" + std::to_string(layer) + ".weight";
}

std::string bias_name(std::size_t layer) { return "l" + std::to_string(layer) + ".bias"; }

void activate_in_place(Matrix& z, Activation act) {
  if (act == Activation::tanh) {
    z = z.array().tanh().matrix();
    return;
  }
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = z(i) * (1.0 / (1.0 + std::exp(-z(i))));
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "silu"; }

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "silu") return Activation::silu;
  throw ConfigError("unknown activation '" + name + "'");
}

Network::Network(std::size_t state_dim, std::vector<std::size_t> hidden, Activation activation,
                 std::size_t time_freqs)
    : state_dim_(state_dim), hidden_(std::move(hidden)), activation_(activation), time_freqs_(time_freqs) {
  if (state_dim_ == 0) throw ContractError("network state dimension must be positive");
  for (std::size_t h : hidden_)
    if (h == 0) throw ContractError("hidden layer width must be positive");
}

std::vector<std::size_t> Network::layer_sizes() const {
  std::vector<std::size_t> sizes{input_dim()};
  sizes.insert(sizes.end(), hidden_.begin(), hidden_.end());
  sizes.push_back(state_dim_);
  return sizes;
}

ParamSet Network::init_params(Rng& rng) const {
  const auto sizes = layer_sizes();
  ParamSet p;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(out * in);
    for (double& v : w) v = (2.0 * rng.uniform() - 1.0) * bound;
    p.add(weight_name(l, num_layers()), {out, in}, std::move(w));
    if (l + 1 < num_layers()) p.add(bias_name(l), {1, out}, std::vector<double>(out, 0.0));
  }
  return p;
}

ParamSet Network::zero_params() const {
  Rng rng(0);
  return init_params(rng).zeros_like();
}

void Network::check_params(const ParamSet& params) const {
  const auto sizes = layer_sizes();
  std::size_t k = 0;
  auto expect = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    if (k >= params.size()) throw ContractError("params missing entry '" + name + "'");
    const ParamEntry& e = params[k++];
    if (e.name != name || e.shape != std::vector<std::size_t>{rows, cols})
      throw ContractError("param entry '" + e.name + "' does not match network layout (expected '" +
                          name + "' " + std::to_string(rows) + "x" + std::to_string(cols) + ")");
  };
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    expect(weight_name(l, num_layers()), sizes[l + 1], sizes[l]);
    if (l + 1 < num_layers()) expect(bias_name(l), 1, sizes[l + 1]);
  }
  if (k != params.size()) throw ContractError("params hold extra entries beyond the network layout");
}

Matrix Network::time_embedding(std::span<const double> t) const {
  Matrix e(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(time_dim()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    double freq = std::numbers::pi;
    for (std::size_t j = 0; j < time_freqs_; ++j, freq *= 2.0) {
      e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * j)) = std::sin(freq * t[i]);
      e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * j + 1)) = std::cos(freq * t[i]);
    }
  }
  return e;
}

void Network::check_input(const Matrix& x, std::span<const double> t) const {
  if (x.cols() != static_cast<Eigen::Index>(state_dim_))
    throw ContractError("state dimension " + std::to_string(x.cols()) + " does not match network (" +
                        std::to_string(state_dim_) + ")");
  if (static_cast<std::size_t>(x.rows()) != t.size())
    throw ContractError("one time value per state row required");
  for (double ti : t)
    if (!(ti >= 0.0 && ti <= 1.0)) throw ContractError("time must lie in [0, 1]");
}

Matrix Network::forward(const ParamSet& params, const Matrix& x, std::span<const double> t) const {
  check_input(x, t);
  Matrix z(x.rows(), static_cast<Eigen::Index>(input_dim()));
  z << x, time_embedding(t);
  std::size_t k = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const Matrix w = params[k++].as_matrix();
    Matrix y = z * w.transpose();
    if (l + 1 < num_layers()) {
      const Matrix b = params[k++].as_matrix();
      y.rowwise() += b.row(0);
      activate_in_place(y, activation_);
    }
    if (!y.allFinite()) throw NumericError("non-finite activation", "layer " + std::to_string(l));
    z = std::move(y);
  }
  return z;
}

Matrix Network::forward(const ParamSet& params, const Matrix& x, double t) const {
  const std::vector<double> ts(static_cast<std::size_t>(x.rows()), t);
  return forward(params, x, ts);
}

Vector Network::forward(const ParamSet& params, const Vector& x, double t) const {
  const Matrix row = x.transpose();
  const double ts[1] = {t};
  return forward(params, row, ts).row(0).transpose();
}

std::vector<Var> Network::bind(Tape& tape, const ParamSet& params) const {
  check_params(params);
  std::vector<Var> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back(tape.parameter(params[i].as_matrix(), i));
  return out;
}

Var Network::forward(Tape& tape, std::span<const Var> bound, const Matrix& x,
                     std::span<const double> t) const {
  check_input(x, t);
  Matrix in(x.rows(), static_cast<Eigen::Index>(input_dim()));
  in << x, time_embedding(t);
  Var z = tape.constant(std::move(in));
  std::size_t k = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    if (l + 1 < num_layers()) {
      const Var w = bound[k++];
      const Var b = bound[k++];
      z = affine(z, w, b);
      z = activation_ == Activation::tanh ? tanh(z) : silu(z);
    } else {
      z = affine(z, bound[k++]);
    }
  }
  return z;
}

GradSet Network::gradients(std::span<const Var> bound, const ParamSet& params) const {
  GradSet g = params.zeros_like();
  if (bound.size() != params.size()) throw ContractError("bound vars do not match params");
  for (std::size_t i = 0; i < bound.size(); ++i) {
    const Matrix gm = bound[i].grad();
    const RowMatrix rm = gm;
    auto& vals = g[i].values;
    std::copy(rm.data(), rm.data() + rm.size(), vals.begin());
  }
  check_gradients_finite(g);
  return g;
}

}  // namespace tempflow::ad
