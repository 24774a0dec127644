#include "ivaear/field/covariance.hpp"

#include "ivaear/error.hpp"
#include "ivaear/rng.hpp"

#include <array>
#include <cmath>
#include <string>

namespace ivaear::field {

Matrix sample_locations(Index n_s, std::uint64_t seed) {
  if (n_s <= 0) throw InvalidArgument("sample_locations: n_s must be at least 1");
  Rng rng(derive_seed(seed, "locations"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix locs(n_s, 2);
  for (Index i = 0; i < n_s; ++i) {
    locs(i, 0) = u(rng);
    locs(i, 1) = u(rng);
  }
  return locs;
}

double matern(double h, double range, double shape) {
  if (!(range > 0.0) || !(shape > 0.0)) {
    throw InvalidArgument("matern: range and shape must be positive");
  }
  if (h < 0.0) throw InvalidArgument("matern: distance must be non-negative");
  if (h == 0.0) return 1.0;
  const double x = h / range;
  // K_ν underflows long before x^ν overflows; past that the correlation is 0.
  if (x > 700.0) return 0.0;
  const double scale = std::pow(2.0, shape - 1.0) * std::tgamma(shape);
  const double value = std::pow(x, shape) * std::cyl_bessel_k(shape, x) / scale;
  return std::min(value, 1.0);
}

Matrix matern_correlation(const Matrix& locations, MaternParams params) {
  const Index n = locations.rows();
  Matrix r(n, n);
  for (Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Index j = 0; j < i; ++j) {
      const double h = (locations.row(i) - locations.row(j)).norm();
      r(i, j) = r(j, i) = matern(h, params.range, params.shape);
    }
  }
  return r;
}

Matrix build_covariance(const Matrix& locations, MaternParams params, const Vector& sigma) {
  if (sigma.size() != locations.rows()) {
    throw ShapeError("build_covariance: sigma has " + std::to_string(sigma.size()) +
                     " entries for " + std::to_string(locations.rows()) + " locations");
  }
  for (Index i = 0; i < sigma.size(); ++i) {
    if (!(sigma(i) > 0.0)) throw InvalidArgument("build_covariance: sigma must be positive");
  }
  const Index n = locations.rows();
  Matrix c(n, n);
  for (Index i = 0; i < n; ++i) {
    c(i, i) = sigma(i) * sigma(i);
    for (Index j = 0; j < i; ++j) {
      const double h = (locations.row(i) - locations.row(j)).norm();
      c(i, j) = c(j, i) = sigma(i) * sigma(j) * matern(h, params.range, params.shape);
    }
  }
  return c;
}

CholeskyFactor cholesky_with_jitter(const Matrix& cov) {
  if (cov.rows() != cov.cols()) throw ShapeError("cholesky: covariance must be square");
  constexpr std::array<double, 6> kJitter{0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4};
  for (double jitter : kJitter) {
    Matrix a = cov;
    a.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
      return {llt.matrixL(), jitter};
    }
  }
  throw DegenerateCovariance("covariance is not positive definite even with jitter 1e-4");
}

Vector sample_gaussian_field(const Matrix& cov, std::uint64_t seed) {
  const CholeskyFactor f = cholesky_with_jitter(cov);
  Rng rng(derive_seed(seed, "gaussian_field"));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector xi(cov.rows());
  for (Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
  return f.lower * xi;
}

}  // namespace ivaear::field
