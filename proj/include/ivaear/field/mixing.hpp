#pragma once

#include "ivaear/field/covariance.hpp"
#include "ivaear/nn/network.hpp"

#include <cstdint>
#include <vector>

namespace ivaear::field {

/// f_L(z) = ψ_L(B_L f_{L−1}(z)) with ψ_1 linear and ELU (α = 1) afterwards.
struct MixingFunction {
  std::vector<Matrix> layers;               // B_1 is S×P, later layers S×S
  std::vector<nn::Activation> activations;  // one per layer

  Index input_dim() const { return layers.front().cols(); }
  Index output_dim() const { return layers.back().rows(); }
};

inline constexpr double kMixingNormTolerance = 0.05;
inline constexpr int kMixingSweeps = 10;

/// Alternately rescales rows then columns to unit Euclidean norm. Performs
/// `sweeps` sweeps, then keeps sweeping (up to 1000) while any row or column
/// norm is outside [1 − tol, 1 + tol].
void normalize_rows_and_columns(Matrix& b, int sweeps = kMixingSweeps,
                                double tol = kMixingNormTolerance);

MixingFunction gen_mixing(Index P, Index L, std::uint64_t seed);
MixingFunction gen_mixing(Index P, Index S, Index L, std::uint64_t seed);

double elu(double v);

/// Applies f to every row of Z (n×P); returns n×S.
Matrix apply_mixing(const MixingFunction& f, const Matrix& Z);

}  // namespace ivaear::field
