#pragma once

#include <cstddef>
#include <vector>

#include "tempflow/common/types.hpp"

namespace tempflow::ad {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Matrix grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode tape over matrix-valued nodes. Rows are batch items.
//
// Supported vocabulary: affine maps, tanh/silu, elementwise add/sub/mul/exp,
// clamp/minimum, constant scaling and offsets, reductions (sum, mean, row sums)
// and column concatenation. Every scalar objective in the library is built
// from these.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Leaf whose gradient is collected; `slot` is caller-defined (ParamSet index).
  Var parameter(Matrix value, std::size_t slot);

  // Runs reverse accumulation from a 1x1 node. Clears previous gradients.
  void backward(Var loss);

  const Matrix& value(Var v) const;
  // Zero matrix for nodes the loss does not depend on.
  Matrix grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

  enum class Op {
    leaf,
    affine,      // x W^T + b  (b may be absent)
    tanh,
    silu,
    add,
    sub,
    mul,
    scale,       // s * x
    add_scalar,  // x + s
    cmul,        // x .* C   (C constant, same shape or one column broadcast across cols)
    cadd,        // x + C
    exp,
    clamp,       // clamp(x, s0, s1)
    minimum,
    sum,
    mean,
    row_sum,
    concat_cols,
  };

  Var push(Op op, Matrix value, std::size_t a, std::size_t b = npos, std::size_t c = npos,
           double s0 = 0.0, double s1 = 0.0, Matrix aux = {});

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  struct Node {
    Op op = Op::leaf;
    std::size_t a = npos, b = npos, c = npos;
    double s0 = 0.0, s1 = 0.0;
    Matrix value;
    Matrix grad;
    Matrix aux;
  };

  void accumulate(std::size_t id, const Matrix& g);

  std::vector<Node> nodes_;
};

Var affine(Var x, Var weight, Var bias);  // weight: out x in, bias: 1 x out
Var affine(Var x, Var weight);            // no bias
Var tanh(Var x);
Var silu(Var x);
Var exp(Var x);
Var clamp(Var x, double lo, double hi);
Var minimum(Var a, Var b);
Var cmul(Var x, const Matrix& c);
Var cadd(Var x, const Matrix& c);
Var sum(Var x);
Var mean(Var x);
Var row_sum(Var x);
Var square(Var x);
Var squared_norm(Var x);
Var concat_cols(Var a, Var b);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);  // elementwise
Var operator*(double s, Var x);
Var operator*(Var x, double s);
Var operator+(Var x, double s);
Var operator-(Var x, double s);
Var operator-(Var x);

}  // namespace tempflow::ad
