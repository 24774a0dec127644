#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace ivaear::field {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct MaternParams {
  double range = 0.2;   // φ
  double shape = 0.5;   // ν
};

/// n_s i.i.d. uniform points in [0,1]², one per row.
Matrix sample_locations(Index n_s, std::uint64_t seed);

/// Matérn correlation (1/(2^{ν−1}Γ(ν)))·(h/φ)^ν·K_ν(h/φ); 1 at h = 0.
double matern(double h, double range, double shape);

/// Matérn correlation matrix between all pairs of rows of `locations`.
Matrix matern_correlation(const Matrix& locations, MaternParams params);

/// C[i][j] = σ_i σ_j · matern(‖s_i − s_j‖). Exactly symmetric.
Matrix build_covariance(const Matrix& locations, MaternParams params, const Vector& sigma);

struct CholeskyFactor {
  Matrix lower;
  double jitter = 0.0;  // diagonal jitter that made the factorization succeed
};

/// Lower Cholesky factor, escalating diagonal jitter 0, 1e-8, 1e-7, ..., 1e-4.
/// Throws DegenerateCovariance if every attempt fails.
CholeskyFactor cholesky_with_jitter(const Matrix& cov);

/// One draw L·ξ with ξ ~ N(0, I).
Vector sample_gaussian_field(const Matrix& cov, std::uint64_t seed);

}  // namespace ivaear::field
