#include "ivaear/field/mixing.hpp"

#include "ivaear/error.hpp"
#include "ivaear/rng.hpp"

#include <cmath>
#include <string>

namespace ivaear::field {

namespace {

bool norms_within(const Matrix& b, double tol) {
  for (Index r = 0; r < b.rows(); ++r) {
    if (std::abs(b.row(r).norm() - 1.0) > tol) return false;
  }
  for (Index c = 0; c < b.cols(); ++c) {
    if (std::abs(b.col(c).norm() - 1.0) > tol) return false;
  }
  return true;
}

void sweep(Matrix& b) {
  for (Index r = 0; r < b.rows(); ++r) b.row(r) /= b.row(r).norm();
  for (Index c = 0; c < b.cols(); ++c) b.col(c) /= b.col(c).norm();
}

}  // namespace

void normalize_rows_and_columns(Matrix& b, int sweeps, double tol) {
  for (int k = 0; k < sweeps; ++k) sweep(b);
  // Non-square matrices cannot have all unit rows and columns; stop after
  // the fixed sweeps for them.
  if (b.rows() != b.cols()) return;
  for (int k = 0; k < 1000 && !norms_within(b, tol); ++k) sweep(b);
}

MixingFunction gen_mixing(Index P, Index L, std::uint64_t seed) { return gen_mixing(P, P, L, seed); }

MixingFunction gen_mixing(Index P, Index S, Index L, std::uint64_t seed) {
  if (P <= 0 || S < P) throw InvalidArgument("gen_mixing: need 0 < P <= S");
  if (L < 1) throw InvalidArgument("gen_mixing: L must be at least 1");
  Rng rng(derive_seed(seed, "mixing"));
  std::normal_distribution<double> normal(0.0, 1.0);
  MixingFunction f;
  for (Index l = 0; l < L; ++l) {
    const Index cols = l == 0 ? P : S;
    Matrix b(S, cols);
    for (Index r = 0; r < S; ++r)
      for (Index c = 0; c < cols; ++c) b(r, c) = normal(rng);
    normalize_rows_and_columns(b);
    f.layers.push_back(std::move(b));
    f.activations.push_back(l == 0 ? nn::Activation::Linear : nn::Activation::Elu);
  }
  return f;
}

double elu(double v) { return v < 0.0 ? std::expm1(v) : v; }

Matrix apply_mixing(const MixingFunction& f, const Matrix& Z) {
  if (f.layers.empty()) throw InvalidArgument("apply_mixing: mixing function has no layers");
  if (Z.cols() != f.input_dim()) {
    throw ShapeError("apply_mixing: latent matrix has " + std::to_string(Z.cols()) +
                     " columns, mixing expects " + std::to_string(f.input_dim()));
  }
  Matrix x = Z;
  for (std::size_t l = 0; l < f.layers.size(); ++l) {
    Matrix next = x * f.layers[l].transpose();
    if (f.activations[l] == nn::Activation::Elu) next = next.unaryExpr([](double v) { return elu(v); });
    x = std::move(next);
  }
  return x;
}

}  // namespace ivaear::field
