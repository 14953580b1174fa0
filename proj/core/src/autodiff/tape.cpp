#include "tempflow/autodiff/tape.hpp"

#include <cmath>
#include <utility>

#include "tempflow/common/errors.hpp"

namespace tempflow::ad {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Tape& owner(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw ContractError("vars belong to different tapes");
  return *a.tape;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractError(std::string(op) + ": shape mismatch");
}

// Constant operands of cmul/cadd may be full-shape or a single column that is
// broadcast across the columns of x.
Matrix broadcast_to(const Matrix& c, const Matrix& like, const char* op) {
  if (c.rows() == like.rows() && c.cols() == like.cols()) return c;
  if (c.rows() == like.rows() && c.cols() == 1) return c.replicate(1, like.cols());
  throw ContractError(std::string(op) + ": constant shape mismatch");
}

}  // namespace

const Matrix& Var::value() const { return tape->value(*this); }
Matrix Var::grad() const { return tape->grad(*this); }

Var Tape::constant(Matrix value) { return push(Op::leaf, std::move(value), npos, npos, npos, 0.0); }

Var Tape::parameter(Matrix value, std::size_t slot) {
  return push(Op::leaf, std::move(value), npos, npos, npos, 1.0, static_cast<double>(slot));
}

Var Tape::push(Op op, Matrix value, std::size_t a, std::size_t b, std::size_t c, double s0,
               double s1, Matrix aux) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.c = c;
  n.s0 = s0;
  n.s1 = s1;
  n.value = std::move(value);
  n.aux = std::move(aux);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const { return nodes_.at(v.id).value; }

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward: var from another tape");
  const Node& root = nodes_.at(loss.id);
  if (root.value.rows() != 1 || root.value.cols() != 1)
    throw ContractError("backward: loss must be a 1x1 node");
  if (!std::isfinite(root.value(0, 0))) throw NumericError("non-finite loss", "loss");

  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[loss.id].grad = Matrix::Ones(1, 1);

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    const Matrix g = n.grad;
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::affine: {
        const Matrix& x = nodes_[n.a].value;
        const Matrix& w = nodes_[n.b].value;
        accumulate(n.a, g * w);
        accumulate(n.b, g.transpose() * x);
        if (n.c != npos) accumulate(n.c, g.colwise().sum());
        break;
      }
      case Op::tanh:
        accumulate(n.a, g.cwiseProduct((1.0 - n.value.array().square()).matrix()));
        break;
      case Op::silu: {
        const Matrix& x = nodes_[n.a].value;
        Matrix d(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          const double s = sigmoid(x(i));
          d(i) = s * (1.0 + x(i) * (1.0 - s));
        }
        accumulate(n.a, g.cwiseProduct(d));
        break;
      }
      case Op::add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::sub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::mul:
        accumulate(n.a, g.cwiseProduct(nodes_[n.b].value));
        accumulate(n.b, g.cwiseProduct(nodes_[n.a].value));
        break;
      case Op::scale:
        accumulate(n.a, n.s0 * g);
        break;
      case Op::add_scalar:
      case Op::cadd:
        accumulate(n.a, g);
        break;
      case Op::cmul:
        accumulate(n.a, g.cwiseProduct(n.aux));
        break;
      case Op::exp:
        accumulate(n.a, g.cwiseProduct(n.value));
        break;
      case Op::clamp: {
        const Matrix& x = nodes_[n.a].value;
        Matrix d = g;
        for (Eigen::Index i = 0; i < x.size(); ++i)
          if (x(i) < n.s0 || x(i) > n.s1) d(i) = 0.0;
        accumulate(n.a, d);
        break;
      }
      case Op::minimum: {
        // Ties route the gradient to the first operand.
        const Matrix& a = nodes_[n.a].value;
        const Matrix& b = nodes_[n.b].value;
        Matrix ga = Matrix::Zero(g.rows(), g.cols());
        Matrix gb = Matrix::Zero(g.rows(), g.cols());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
          if (a(i) <= b(i))
            ga(i) = g(i);
          else
            gb(i) = g(i);
        }
        accumulate(n.a, ga);
        accumulate(n.b, gb);
        break;
      }
      case Op::sum: {
        const Matrix& x = nodes_[n.a].value;
        accumulate(n.a, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Op::mean: {
        const Matrix& x = nodes_[n.a].value;
        accumulate(n.a, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / static_cast<double>(x.size())));
        break;
      }
      case Op::row_sum: {
        const Matrix& x = nodes_[n.a].value;
        accumulate(n.a, g.replicate(1, x.cols()));
        break;
      }
      case Op::concat_cols: {
        const Eigen::Index ca = nodes_[n.a].value.cols();
        const Eigen::Index cb = nodes_[n.b].value.cols();
        accumulate(n.a, g.leftCols(ca));
        accumulate(n.b, g.rightCols(cb));
        break;
      }
    }
  }
}

Var affine(Var x, Var weight, Var bias) {
  Tape& t = owner(x, weight);
  owner(x, bias);
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  const Matrix& bv = bias.value();
  if (xv.cols() != wv.cols()) throw ContractError("affine: input width does not match weight");
  if (bv.rows() != 1 || bv.cols() != wv.rows()) throw ContractError("affine: bias shape mismatch");
  Matrix y = xv * wv.transpose();
  y.rowwise() += bv.row(0);
  return t.push(Tape::Op::affine, std::move(y), x.id, weight.id, bias.id);
}

Var affine(Var x, Var weight) {
  Tape& t = owner(x, weight);
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  if (xv.cols() != wv.cols()) throw ContractError("affine: input width does not match weight");
  return t.push(Tape::Op::affine, xv * wv.transpose(), x.id, weight.id);
}

Var tanh(Var x) { return x.tape->push(Tape::Op::tanh, x.value().array().tanh().matrix(), x.id); }

Var silu(Var x) {
  const Matrix& xv = x.value();
  Matrix y(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.size(); ++i) y(i) = xv(i) * sigmoid(xv(i));
  return x.tape->push(Tape::Op::silu, std::move(y), x.id);
}

Var exp(Var x) { return x.tape->push(Tape::Op::exp, x.value().array().exp().matrix(), x.id); }

Var clamp(Var x, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo > hi");
  return x.tape->push(Tape::Op::clamp, x.value().cwiseMax(lo).cwiseMin(hi), x.id, Tape::npos,
                      Tape::npos, lo, hi);
}

Var minimum(Var a, Var b) {
  Tape& t = owner(a, b);
  require_same_shape(a.value(), b.value(), "minimum");
  return t.push(Tape::Op::minimum, a.value().cwiseMin(b.value()), a.id, b.id);
}

Var cmul(Var x, const Matrix& c) {
  Matrix full = broadcast_to(c, x.value(), "cmul");
  Matrix y = x.value().cwiseProduct(full);
  return x.tape->push(Tape::Op::cmul, std::move(y), x.id, Tape::npos, Tape::npos, 0.0, 0.0,
                      std::move(full));
}

Var cadd(Var x, const Matrix& c) {
  const Matrix full = broadcast_to(c, x.value(), "cadd");
  return x.tape->push(Tape::Op::cadd, x.value() + full, x.id);
}

Var sum(Var x) { return x.tape->push(Tape::Op::sum, Matrix::Constant(1, 1, x.value().sum()), x.id); }

Var mean(Var x) {
  if (x.value().size() == 0) throw ContractError("mean of empty node");
  return x.tape->push(Tape::Op::mean, Matrix::Constant(1, 1, x.value().mean()), x.id);
}

Var row_sum(Var x) { return x.tape->push(Tape::Op::row_sum, x.value().rowwise().sum(), x.id); }

Var square(Var x) { return x * x; }

Var squared_norm(Var x) { return sum(square(x)); }

Var concat_cols(Var a, Var b) {
  Tape& t = owner(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows()) throw ContractError("concat_cols: row mismatch");
  Matrix y(av.rows(), av.cols() + bv.cols());
  y << av, bv;
  return t.push(Tape::Op::concat_cols, std::move(y), a.id, b.id);
}

Var operator+(Var a, Var b) {
  Tape& t = owner(a, b);
  require_same_shape(a.value(), b.value(), "add");
  return t.push(Tape::Op::add, a.value() + b.value(), a.id, b.id);
}

Var operator-(Var a, Var b) {
  Tape& t = owner(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  return t.push(Tape::Op::sub, a.value() - b.value(), a.id, b.id);
}

Var operator*(Var a, Var b) {
  Tape& t = owner(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  return t.push(Tape::Op::mul, a.value().cwiseProduct(b.value()), a.id, b.id);
}

Var operator*(double s, Var x) {
  return x.tape->push(Tape::Op::scale, s * x.value(), x.id, Tape::npos, Tape::npos, s);
}

Var operator*(Var x, double s) { return s * x; }

Var operator+(Var x, double s) {
  return x.tape->push(Tape::Op::add_scalar, (x.value().array() + s).matrix(), x.id, Tape::npos,
                      Tape::npos, s);
}

Var operator-(Var x, double s) { return x + (-s); }

Var operator-(Var x) { return -1.0 * x; }

}  // namespace tempflow::ad
