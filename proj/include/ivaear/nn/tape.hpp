#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace ivaear::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
};

/// Reverse-mode differentiation over dense matrices.
///
/// Every primitive appends a node holding its forward value and a pullback
/// that accumulates the node's adjoint into its inputs. backward() walks the
/// nodes in reverse insertion order, which is a valid topological order
/// because inputs always precede their consumers.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Matrix value);

  /// Fills the adjoint of every node with d(loss)/d(node). Nodes that do not
  /// influence the loss get an exact zero adjoint.
  void backward(Var loss);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  const Matrix& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  void clear();

  // Internal: used by the primitive ops below.
  using Pullback = std::function<void(Tape&, std::size_t)>;
  Var record(Matrix value, Pullback pullback);
  Matrix& adjoint(std::size_t id) { return nodes_[id].grad; }
  const Matrix& adjoint_of(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Pullback pullback;
  };
  std::vector<Node> nodes_;
  bool has_grads_ = false;
};

// Elementwise arithmetic; shapes must match exactly.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator*(double c, Var a);
Var operator*(Var a, double c);
Var operator+(Var a, double c);
Var operator-(Var a);

/// x · wᵀ + 1·b with x: n×in, w: out×in, b: 1×out.
Var affine(Var x, Var w, Var b);

Var square(Var a);
Var log(Var a);
Var exp(Var a);
Var leaky_relu(Var a, double slope = 0.01);
Var elu(Var a, double alpha = 1.0);
/// softplus(a) + floor; strictly positive for finite input.
Var softplus(Var a, double floor = 0.0);

Var block(Var a, Index row, Index col, Index rows, Index cols);
Var sum(Var a);

}  // namespace ivaear::nn
