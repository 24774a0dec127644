#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ivaear::eval {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Ω(i, j) = Pearson correlation of true column i and estimated column j.
Matrix correlation_matrix(const Matrix& z_true, const Matrix& z_est);

struct MccResult {
  double value = 0;
  std::vector<Index> permutation;  // true component i ↔ estimate permutation[i]
};

/// (1/P)·max_π Σ_i |Ω(i, π(i))| via the Hungarian method.
MccResult mcc(const Matrix& omega);
/// Same objective by enumerating all P! permutations (P ≤ 8).
MccResult mcc_bruteforce(const Matrix& omega);

double mse(std::span<const double> truth, std::span<const double> pred);
/// Column-wise MSE.
Vector per_variable_mse(const Matrix& truth, const Matrix& pred);
/// (1/S) Σ_i MSE_i / variances_i.
double wmse(const Matrix& truth, const Matrix& pred, const Vector& variances);

struct Deseasonalized {
  Eigen::Vector3d coefficients;  // intercept, cos, sin
  Vector residuals;
};

/// OLS of x on [1, cos(2πt/period), sin(2πt/period)].
Deseasonalized deseasonalize(std::span<const double> x, std::span<const double> t, double period);

/// Population variance of each deseasonalized column; the wMSE weights.
Vector deseasonalized_variances(const Matrix& x, std::span<const double> t, double period);

struct EvalReport {
  Matrix omega;
  double mcc = 0;
  std::vector<Index> permutation;
  Vector per_variable_mse;
  double wmse = 0;
  std::vector<double> elbo_trace;
  std::uint64_t seed = 0;

  /// `key=value` lines.
  std::string to_text() const;
  std::string csv_header() const;
  std::string csv_row() const;
};

}  // namespace ivaear::eval
