#include "ivaear/nn/tape.hpp"

#include "ivaear/error.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace ivaear::nn {

const Matrix& Var::value() const { return tape->value(*this); }
const Matrix& Var::grad() const { return tape->grad(*this); }

Var Tape::constant(Matrix value) { return record(std::move(value), nullptr); }

Var Tape::parameter(Matrix value) { return record(std::move(value), nullptr); }

Var Tape::record(Matrix value, Pullback pullback) {
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(pullback)});
  has_grads_ = false;
  return Var{this, nodes_.size() - 1};
}

void Tape::clear() {
  nodes_.clear();
  has_grads_ = false;
}

const Matrix& Tape::grad(Var v) const {
  if (!has_grads_) {
    throw InvalidArgument("Tape::grad called before backward()");
  }
  return nodes_[v.id].grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this || loss.id >= nodes_.size()) {
    throw InvalidArgument("backward: loss does not belong to this tape");
  }
  const Matrix& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw InvalidArgument("backward: loss must be a 1x1 scalar, got " + std::to_string(lv.rows()) +
                          "x" + std::to_string(lv.cols()));
  }
  for (auto& n : nodes_) {
    n.grad.setZero(n.value.rows(), n.value.cols());
  }
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].pullback) {
      nodes_[i].pullback(*this, i);
    }
  }
  has_grads_ = true;
}

namespace {

void check_same_shape(Var a, Var b, const char* op) {
  if (a.tape != b.tape) {
    throw InvalidArgument(std::string(op) + ": operands recorded on different tapes");
  }
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

Var operator+(Var a, Var b) {
  check_same_shape(a, b, "add");
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(a.value() + b.value(), [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint_of(self);
    t.adjoint(ia) += g;
    t.adjoint(ib) += g;
  });
}

Var operator-(Var a, Var b) {
  check_same_shape(a, b, "sub");
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(a.value() - b.value(), [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint_of(self);
    t.adjoint(ia) += g;
    t.adjoint(ib) -= g;
  });
}

Var operator*(Var a, Var b) {
  check_same_shape(a, b, "mul");
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(a.value().cwiseProduct(b.value()), [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint_of(self);
    t.adjoint(ia) += g.cwiseProduct(t.value(Var{&t, ib}));
    t.adjoint(ib) += g.cwiseProduct(t.value(Var{&t, ia}));
  });
}

Var operator/(Var a, Var b) {
  check_same_shape(a, b, "div");
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(a.value().cwiseQuotient(b.value()), [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint_of(self);
    const Matrix& bv = t.value(Var{&t, ib});
    const Matrix& out = t.value(Var{&t, self});
    t.adjoint(ia) += g.cwiseQuotient(bv);
    t.adjoint(ib) -= g.cwiseProduct(out).cwiseQuotient(bv);
  });
}

Var operator*(double c, Var a) {
  const std::size_t ia = a.id;
  return a.tape->record(c * a.value(), [ia, c](Tape& t, std::size_t self) {
    t.adjoint(ia) += c * t.adjoint_of(self);
  });
}

Var operator*(Var a, double c) { return c * a; }

Var operator+(Var a, double c) {
  const std::size_t ia = a.id;
  return a.tape->record((a.value().array() + c).matrix(), [ia](Tape& t, std::size_t self) {
    t.adjoint(ia) += t.adjoint_of(self);
  });
}

Var operator-(Var a) { return -1.0 * a; }

Var affine(Var x, Var w, Var b) {
  if (x.cols() != w.cols()) {
    throw ShapeError("affine: input has " + std::to_string(x.cols()) + " columns, weight expects " +
                     std::to_string(w.cols()));
  }
  if (b.rows() != 1 || b.cols() != w.rows()) {
    throw ShapeError("affine: bias must be 1x" + std::to_string(w.rows()));
  }
  Matrix out = x.value() * w.value().transpose();
  out.rowwise() += b.value().row(0);
  const std::size_t ix = x.id, iw = w.id, ib = b.id;
  return x.tape->record(std::move(out), [ix, iw, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint_of(self);
    t.adjoint(ix).noalias() += g * t.value(Var{&t, iw});
    t.adjoint(iw).noalias() += g.transpose() * t.value(Var{&t, ix});
    t.adjoint(ib) += g.colwise().sum();
  });
}

Var square(Var a) {
  const std::size_t ia = a.id;
  return a.tape->record(a.value().array().square().matrix(), [ia](Tape& t, std::size_t self) {
    t.adjoint(ia).array() += 2.0 * t.adjoint_of(self).array() * t.value(Var{&t, ia}).array();
  });
}

Var log(Var a) {
  const std::size_t ia = a.id;
  return a.tape->record(a.value().array().log().matrix(), [ia](Tape& t, std::size_t self) {
    t.adjoint(ia).array() += t.adjoint_of(self).array() / t.value(Var{&t, ia}).array();
  });
}

Var exp(Var a) {
  const std::size_t ia = a.id;
  return a.tape->record(a.value().array().exp().matrix(), [ia](Tape& t, std::size_t self) {
    t.adjoint(ia).array() += t.adjoint_of(self).array() * t.value(Var{&t, self}).array();
  });
}

Var leaky_relu(Var a, double slope) {
  const std::size_t ia = a.id;
  Matrix out = a.value().unaryExpr([slope](double v) { return v < 0.0 ? slope * v : v; });
  return a.tape->record(std::move(out), [ia, slope](Tape& t, std::size_t self) {
    const Matrix& in = t.value(Var{&t, ia});
    t.adjoint(ia).array() +=
        t.adjoint_of(self).array() *
        in.array().unaryExpr([slope](double v) { return v < 0.0 ? slope : 1.0; });
  });
}

Var elu(Var a, double alpha) {
  const std::size_t ia = a.id;
  Matrix out =
      a.value().unaryExpr([alpha](double v) { return v < 0.0 ? alpha * std::expm1(v) : v; });
  return a.tape->record(std::move(out), [ia, alpha](Tape& t, std::size_t self) {
    const Matrix& in = t.value(Var{&t, ia});
    t.adjoint(ia).array() +=
        t.adjoint_of(self).array() *
        in.array().unaryExpr([alpha](double v) { return v < 0.0 ? alpha * std::exp(v) : 1.0; });
  });
}

Var softplus(Var a, double floor) {
  const std::size_t ia = a.id;
  Matrix out = a.value().unaryExpr(
      [floor](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))) + floor; });
  return a.tape->record(std::move(out), [ia](Tape& t, std::size_t self) {
    const Matrix& in = t.value(Var{&t, ia});
    // d softplus / dv = logistic(v)
    t.adjoint(ia).array() +=
        t.adjoint_of(self).array() * in.array().unaryExpr([](double v) {
          return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        });
  });
}

Var block(Var a, Index row, Index col, Index rows, Index cols) {
  if (row < 0 || col < 0 || rows < 0 || cols < 0 || row + rows > a.rows() ||
      col + cols > a.cols()) {
    throw ShapeError("block: requested region exceeds " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()));
  }
  const std::size_t ia = a.id;
  return a.tape->record(a.value().block(row, col, rows, cols),
                        [ia, row, col, rows, cols](Tape& t, std::size_t self) {
                          t.adjoint(ia).block(row, col, rows, cols) += t.adjoint_of(self);
                        });
}

Var sum(Var a) {
  const std::size_t ia = a.id;
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->record(std::move(out), [ia](Tape& t, std::size_t self) {
    t.adjoint(ia).array() += t.adjoint_of(self)(0, 0);
  });
}

}  // namespace ivaear::nn
