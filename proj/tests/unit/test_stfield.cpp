#include "ivaear/error.hpp"
#include "ivaear/field/covariance.hpp"
#include "ivaear/field/latent.hpp"
#include "ivaear/field/mixing.hpp"
#include "ivaear/field/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace ivaear;
using namespace ivaear::field;

namespace {

double lag1_autocorrelation(const Vector& v) {
  const double m = v.mean();
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    den += (v(i) - m) * (v(i) - m);
    if (i > 0) num += (v(i) - m) * (v(i - 1) - m);
  }
  return num / den;
}

}  // namespace

TEST_CASE("sample_locations") {
  const Matrix a = sample_locations(100, 1);
  CHECK(a.rows() == 100);
  CHECK(a.cols() == 2);
  CHECK(a.minCoeff() >= 0.0);
  CHECK(a.maxCoeff() <= 1.0);
  CHECK(sample_locations(100, 1) == a);
  CHECK(sample_locations(1, 3).rows() == 1);
  CHECK_THROWS_AS(sample_locations(0, 1), InvalidArgument);
}

TEST_CASE("matern closed forms") {
  CHECK(matern(0.0, 0.3, 1.7) == 1.0);
  CHECK(matern(0.2, 0.2, 0.5) == doctest::Approx(0.367879).epsilon(1e-6));
  for (double h = 0.001; h < 2.0; h += 0.0173) {
    const double x = h / 0.15;
    CHECK(std::abs(matern(h, 0.15, 0.5) - std::exp(-x)) < 1e-12);
    CHECK(std::abs(matern(h, 0.15, 1.5) - (1 + x) * std::exp(-x)) < 1e-12);
    CHECK(std::abs(matern(h, 0.15, 2.5) - (1 + x + x * x / 3) * std::exp(-x)) < 1e-12);
  }
  CHECK_THROWS_AS(matern(-0.1, 0.2, 0.5), InvalidArgument);
  CHECK_THROWS_AS(matern(0.1, 0.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(matern(0.1, 0.2, -1.0), InvalidArgument);
}

TEST_CASE("matern is strictly decreasing for nu = 1/2 and bounded by one") {
  double prev = 1.0;
  for (int i = 1; i <= 100; ++i) {
    const double v = matern(0.01 * i, 0.2, 0.5);
    CHECK(v < prev);
    CHECK(v > 0.0);
    prev = v;
  }
  for (const auto& p : default_innovation_matern()) {
    for (double h = 0.0; h < 1.5; h += 0.05) {
      const double v = matern(h, p.range, p.shape);
      CHECK(v <= 1.0);
      CHECK(v >= 0.0);
    }
  }
}

TEST_CASE("default Matérn tables") {
  const auto& ic = default_innovation_matern();
  REQUIRE(ic.size() == 6);
  CHECK(ic[0].range == 0.2);
  CHECK(ic[0].shape == 0.5);
  const auto& sh = default_shift_matern();
  REQUIRE(sh.size() == 6);
  CHECK(sh[0].range == 0.25);
  CHECK(sh[0].shape == 5.0);
  CHECK(sh[5].range == ic[5].range);
  CHECK(sh[5].shape == ic[5].shape);
}

TEST_CASE("build_covariance") {
  Matrix one = Matrix::Constant(1, 2, 0.4);
  CHECK(build_covariance(one, {0.2, 0.5}, Vector::Ones(1)) == Matrix::Ones(1, 1));
  Matrix twin(2, 2);
  twin << 0.3, 0.3, 0.3, 0.3;
  Vector sigma(2);
  sigma << 2.0, 3.0;
  const Matrix c = build_covariance(twin, {0.2, 0.5}, sigma);
  CHECK(c(0, 1) == 6.0);
  CHECK(c(1, 0) == 6.0);
  const Matrix locs = sample_locations(40, 5);
  const Matrix big = build_covariance(locs, {0.1, 0.25}, Vector::Constant(40, 1.3));
  CHECK(big == big.transpose());
  CHECK_THROWS_AS(build_covariance(locs, {0.1, 0.25}, Vector::Zero(40)), InvalidArgument);
}

TEST_CASE("cholesky jitter escalation") {
  const Matrix locs = sample_locations(30, 2);
  const auto f = cholesky_with_jitter(matern_correlation(locs, {0.2, 0.5}));
  CHECK(f.jitter == 0.0);
  Matrix twin(2, 2);
  twin << 0.3, 0.3, 0.3, 0.3;
  const auto g = cholesky_with_jitter(build_covariance(twin, {0.2, 0.5}, Vector::Ones(2)));
  CHECK(g.jitter > 0.0);
  CHECK(g.jitter <= 1e-4);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 0) = -1.0;
  CHECK_THROWS_AS(cholesky_with_jitter(bad), DegenerateCovariance);
}

TEST_CASE("sample_gaussian_field") {
  Matrix draws(10000, 3);
  for (Index k = 0; k < draws.rows(); ++k) {
    draws.row(k) = sample_gaussian_field(Matrix::Identity(3, 3), static_cast<std::uint64_t>(k)).transpose();
  }
  for (Index j = 0; j < 3; ++j) {
    const double var = (draws.col(j).array() - draws.col(j).mean()).square().mean();
    CHECK(std::abs(var - 1.0) < 0.05);
  }
  const Vector z = sample_gaussian_field(Matrix::Zero(4, 4), 3);
  CHECK(z.cwiseAbs().maxCoeff() < 1e-3);
  CHECK(sample_gaussian_field(Matrix::Identity(3, 3), 9) == sample_gaussian_field(Matrix::Identity(3, 3), 9));
}

TEST_CASE("AR coefficient field from a shift") {
  const Vector zero = Vector::Zero(3);
  const Index n_t = 100;
  const Matrix full_cycle = ar_coefficients_from_shift(zero, n_t, static_cast<double>(n_t), 0.8);
  CHECK(full_cycle(0, 0) == doctest::Approx(0.8).epsilon(1e-12));
  const Matrix g = ar_coefficients_from_shift(zero, n_t, 1.0, 0.7);
  CHECK(g(2, n_t / 2 - 1) == doctest::Approx(-0.7).epsilon(1e-12));
  const Matrix locs = sample_locations(20, 4);
  const auto f = gen_ar_coefficient_field(locs, 50, 3.0, {0.25, 5.0}, 0.9, 8);
  CHECK(f.gamma.rows() == 20);
  CHECK(f.gamma.cols() == 50);
  CHECK(f.gamma.cwiseAbs().maxCoeff() <= 0.9 + 1e-12);
  for (Index s = 0; s < 20; ++s) {
    CHECK(f.gamma(s, 9) == doctest::Approx(0.9 * std::cos(2 * std::numbers::pi * 10 * 3.0 / 50 - f.shift(s))));
  }
}

TEST_CASE("scale_ar_coefficients") {
  Matrix g = Matrix::Constant(2, 3, 0.25);
  g(1, 2) = -0.5;
  const auto s = scale_ar_coefficients({g});
  CHECK((s[0] - g / 0.51).cwiseAbs().maxCoeff() < 1e-15);

  std::vector<Matrix> three{Matrix::Constant(2, 2, 0.7), Matrix::Constant(2, 2, -0.4), Matrix::Constant(2, 2, 0.2)};
  three[1](0, 1) = 0.9;
  const double S = 0.7 + 0.9 + 0.2;
  const auto t = scale_ar_coefficients(three);
  const double at_max = std::abs(t[0](0, 1)) + std::abs(t[1](0, 1)) + std::abs(t[2](0, 1));
  CHECK(at_max == doctest::Approx(S / (S + 0.01)).epsilon(1e-14));
  CHECK(at_max < 1.0);

  const auto z = scale_ar_coefficients({Matrix::Zero(2, 2)});
  CHECK(z[0] == Matrix::Zero(2, 2));
}

TEST_CASE("variance field partitions space-time into 50 cells") {
  const Matrix locs = sample_locations(60, 6);
  const Index n_t = 95;
  const auto v = gen_variance_field(locs, n_t, 10);
  CHECK(v.segment_sigma.size() == 50);
  CHECK(v.segment_sigma.minCoeff() >= 0.1);
  CHECK(v.segment_sigma.maxCoeff() <= 3.0);
  std::set<Index> segments;
  for (Index s = 0; s < 60; ++s) {
    for (Index t = 1; t <= n_t; ++t) {
      const Index k = v.segment(s, t);
      REQUIRE(k >= 0);
      REQUIRE(k < 50);
      segments.insert(k);
      CHECK(v.sigma(s, t - 1) == v.segment_sigma(k));
    }
  }
  CHECK(time_segment(1, n_t) == 0);
  CHECK(time_segment(n_t, n_t) == 9);
  const auto one = gen_variance_field(locs.topRows(1), 20, 3, 1.0, 1.0);
  CHECK(one.sigma == Matrix::Ones(1, 20));
}

TEST_CASE("trend field") {
  const Matrix locs = sample_locations(5, 1);
  CHECK(trend_field(locs, 7, TrendParams{}) == Matrix::Zero(5, 7));
  TrendParams p;
  p.theta_s1 = 1.0;
  const Matrix m = trend_field(locs, 4, p);
  for (Index s = 0; s < 5; ++s)
    for (Index t = 0; t < 4; ++t) CHECK(m(s, t) == locs(s, 0));
  for (std::uint64_t k = 0; k < 10000; ++k) {
    const auto q = sample_trend_params(k);
    REQUIRE(std::abs(q.theta_s1) <= 3.0);
    REQUIRE(std::abs(q.theta_s2) <= 3.0);
    REQUIRE(std::abs(q.theta_t) <= 0.01);
    REQUIRE(q.omega_s1 >= 0.2);
    REQUIRE(q.omega_s1 <= 4.0);
    REQUIRE(q.omega_s2 >= 0.2);
    REQUIRE(q.omega_s2 <= 4.0);
    REQUIRE(q.omega_t >= 0.01);
    REQUIRE(q.omega_t <= 0.1);
    REQUIRE(q.omega_c >= 0.0);
    REQUIRE(q.omega_c <= 2 * std::numbers::pi);
    REQUIRE(std::abs(q.alpha) <= 2.0);
  }
}

TEST_CASE("AR simulation autocorrelation") {
  const Matrix loc = Matrix::Constant(1, 2, 0.5);
  const Index n_t = 10000;
  const std::vector<MaternParams> innov{{0.2, 0.5}};
  const std::vector<Matrix> sigma{Matrix::Ones(1, n_t)};
  const Matrix white = simulate_ar_fields(loc, n_t, {{Matrix::Zero(1, n_t)}}, sigma, innov, 100, 1);
  CHECK(std::abs(lag1_autocorrelation(white.col(0))) < 0.03);
  const Matrix ar = simulate_ar_fields(loc, n_t, {{Matrix::Constant(1, n_t, 0.9)}}, sigma, innov, 100, 2);
  CHECK(std::abs(lag1_autocorrelation(ar.col(0)) - 0.9) < 0.05);
}

TEST_CASE("simulate_latents settings") {
  SimulationSpec spec;
  spec.P = 3;
  spec.S = 3;
  spec.n_s = 12;
  spec.n_t = 40;
  spec.seed = 21;
  spec.setting = 1;
  const auto s1 = simulate_latents(spec);
  CHECK(s1.values.rows() == 12 * 40);
  CHECK(s1.values.cols() == 3);
  CHECK(simulate_latents(spec).values == s1.values);
  for (const auto& v : s1.variance_field) CHECK(v == Matrix::Ones(12, 40));
  for (const auto& comp : s1.ar_coeffs) CHECK(comp[0].cwiseAbs().maxCoeff() < 1.0);

  spec.setting = 2;
  const auto s2 = simulate_latents(spec);
  for (Index p = 0; p < 3; ++p) {
    for (Index s = 0; s < 12; ++s) {
      for (Index t = 1; t <= 40; ++t) {
        CHECK(s2.values(s2.row(s, t), p) ==
              doctest::Approx(s1.values(s1.row(s, t), p) + s2.trend_field[static_cast<std::size_t>(p)](s, t - 1))
                  .epsilon(1e-12));
      }
    }
  }

  spec.setting = 3;
  const auto s3 = simulate_latents(spec);
  for (std::size_t p = 0; p < 3; ++p) {
    const double rho = s3.draws[p].rho[0];
    CHECK(rho >= 0.1);
    CHECK(rho <= 0.9);
    CHECK((s3.ar_coeffs[p][0].array() == s3.ar_coeffs[p][0](0, 0)).all());
    CHECK(s3.variance_field[p].minCoeff() >= 0.1);
  }
  spec.setting = 7;
  CHECK_THROWS_AS(simulate_latents(spec), InvalidArgument);
  spec.setting = 1;
  spec.S = 2;
  CHECK_THROWS_AS(simulate_latents(spec), InvalidArgument);
}

TEST_CASE("simulation divergence guard") {
  const Matrix loc = Matrix::Constant(1, 2, 0.5);
  const std::vector<MaternParams> innov{{0.2, 0.5}};
  CHECK_THROWS_AS(simulate_ar_fields(loc, 400, {{Matrix::Constant(1, 400, 1.5)}}, {Matrix::Ones(1, 400)}, innov, 100, 1),
                  SimulationDiverged);
}

TEST_CASE("mixing normalization and application") {
  CHECK(elu(-1.0) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-15));
  CHECK(elu(-1.0) == doctest::Approx(-0.6321).epsilon(1e-4));
  CHECK(elu(2.0) == 2.0);

  const auto f1 = gen_mixing(4, 1, 3);
  REQUIRE(f1.layers.size() == 1);
  CHECK(f1.activations[0] == nn::Activation::Linear);

  const auto f3 = gen_mixing(5, 3, 4);
  REQUIRE(f3.layers.size() == 3);
  CHECK(f3.activations[1] == nn::Activation::Elu);
  for (const auto& b : f3.layers) {
    for (Index i = 0; i < b.rows(); ++i) {
      CHECK(b.row(i).norm() >= 0.95);
      CHECK(b.row(i).norm() <= 1.05);
      CHECK(b.col(i).norm() >= 0.95);
      CHECK(b.col(i).norm() <= 1.05);
    }
  }

  MixingFunction id{{Matrix::Identity(3, 3)}, {nn::Activation::Linear}};
  const Matrix Z = sample_locations(10, 2).leftCols(2).replicate(1, 2).leftCols(3);
  CHECK(apply_mixing(id, Z) == Z);
  CHECK_THROWS_AS(apply_mixing(id, Matrix::Zero(2, 4)), ShapeError);

  // Linear witness: layer-2 output with ELU cannot be fitted by an affine map.
  MixingFunction two{{Matrix::Identity(2, 2), Matrix::Identity(2, 2)}, {nn::Activation::Linear, nn::Activation::Elu}};
  Matrix z(50, 2);
  for (Index i = 0; i < 50; ++i) {
    z(i, 0) = -2.0 + 0.08 * static_cast<double>(i);
    z(i, 1) = std::sin(static_cast<double>(i));
  }
  const Matrix x = apply_mixing(two, z);
  for (Index i = 0; i < 50; ++i) {
    CHECK(x(i, 0) == doctest::Approx(z(i, 0) < 0 ? std::exp(z(i, 0)) - 1 : z(i, 0)));
  }
  Matrix design(50, 3);
  design << z, Matrix::Ones(50, 1);
  const Matrix coef = design.colPivHouseholderQr().solve(x);
  CHECK((x - design * coef).norm() > 1e-3);
}

TEST_CASE("simulate_dataset layout") {
  SimulationSpec spec;
  spec.setting = 5;
  spec.P = 3;
  spec.S = 3;
  spec.n_s = 30;
  spec.n_t = 200;
  spec.seed = 4;
  const auto sim = simulate_dataset(spec);
  CHECK(sim.dataset.rows() == 6000);
  CHECK(sim.dataset.times.front() == 1);
  CHECK(sim.dataset.times[199] == 200);
  CHECK(sim.dataset.times[200] == 1);
  CHECK(sim.dataset.coords.row(0) == sim.dataset.coords.row(199));
  CHECK((sim.dataset.x - apply_mixing(sim.mixing, *sim.dataset.z)).norm() == 0.0);
  CHECK(simulation_meta_json(spec, sim) == simulation_meta_json(spec, simulate_dataset(spec)));
}
