#include "ivaear/field/latent.hpp"

#include "ivaear/error.hpp"
#include "ivaear/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace ivaear::field {

const std::vector<MaternParams>& default_innovation_matern() {
  static const std::vector<MaternParams> table{
      {0.20, 0.50}, {0.15, 1.00}, {0.10, 0.25}, {0.30, 2.00}, {0.05, 0.75}, {0.25, 1.50}};
  return table;
}

const std::vector<MaternParams>& default_shift_matern() {
  // Sixth entry has no published shift parameters; it reuses the sixth
  // innovation row.
  static const std::vector<MaternParams> table{
      {0.25, 5.0}, {0.15, 2.0}, {0.10, 3.0}, {0.30, 4.0}, {0.20, 1.0}, {0.25, 1.5}};
  return table;
}

void SimulationSpec::validate() const {
  if (setting < 1 || setting > 6) throw InvalidArgument("setting must be in 1..6");
  if (P <= 0 || S <= 0 || n_s <= 0 || n_t <= 0) {
    throw InvalidArgument("P, S, n_s and n_t must be positive");
  }
  if (S < P) throw InvalidArgument("observed dimension S must be at least P");
  if (R < 1) throw InvalidArgument("AR order R must be at least 1");
  if (L < 1) throw InvalidArgument("mixing layer count L must be at least 1");
  if (burn_in < 0) throw InvalidArgument("burn_in must be non-negative");
  if (matern_params.empty() || shift_params.empty()) {
    throw InvalidArgument("Matérn parameter tables must be non-empty");
  }
  for (const auto& m : matern_params) {
    if (!(m.range > 0.0) || !(m.shape > 0.0)) throw InvalidArgument("Matérn φ and ν must be positive");
  }
  for (const auto& m : shift_params) {
    if (!(m.range > 0.0) || !(m.shape > 0.0)) throw InvalidArgument("Matérn φ and ν must be positive");
  }
  if (!(sigma_low > 0.0) || !(sigma_high >= sigma_low)) {
    throw InvalidArgument("sigma range must satisfy 0 < low <= high");
  }
}

Matrix trend_field(const Matrix& locations, Index n_t, const TrendParams& p) {
  Matrix mu(locations.rows(), n_t);
  for (Index s = 0; s < locations.rows(); ++s) {
    const double s1 = locations(s, 0), s2 = locations(s, 1);
    for (Index t = 1; t <= n_t; ++t) {
      const double td = static_cast<double>(t);
      mu(s, t - 1) = p.theta_s1 * s1 + p.theta_s2 * s2 + p.theta_t * td +
                     p.alpha * std::sin(p.omega_s1 * s1 + p.omega_s2 * s2 + p.omega_t * td + p.omega_c);
    }
  }
  return mu;
}

TrendParams sample_trend_params(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "trend_params"));
  auto u = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  TrendParams p;
  p.theta_s1 = u(-3.0, 3.0);
  p.theta_s2 = u(-3.0, 3.0);
  p.theta_t = u(-0.01, 0.01);
  p.omega_s1 = u(0.2, 4.0);
  p.omega_s2 = u(0.2, 4.0);
  p.omega_t = u(0.01, 0.1);
  p.omega_c = u(0.0, 2.0 * std::numbers::pi);
  p.alpha = u(-2.0, 2.0);
  return p;
}

Trend gen_trend(const Matrix& locations, Index n_t, std::uint64_t seed) {
  Trend tr;
  tr.params = sample_trend_params(seed);
  tr.values = trend_field(locations, n_t, tr.params);
  return tr;
}

Matrix ar_coefficients_from_shift(const Vector& shift, Index n_t, double b, double rho) {
  if (!(b > 0.0)) throw InvalidArgument("AR coefficient scale b must be positive");
  Matrix g(shift.size(), n_t);
  const double nt = static_cast<double>(n_t);
  for (Index s = 0; s < shift.size(); ++s) {
    for (Index t = 1; t <= n_t; ++t) {
      g(s, t - 1) = rho * std::cos(2.0 * std::numbers::pi * static_cast<double>(t) * b / nt - shift(s));
    }
  }
  return g;
}

ArCoefficientField gen_ar_coefficient_field(const Matrix& locations, Index n_t, double b,
                                            MaternParams shift_params, double rho,
                                            std::uint64_t seed) {
  constexpr double kShiftVariance = 0.3;
  const Vector unit_sigma = Vector::Constant(locations.rows(), std::sqrt(kShiftVariance));
  const Matrix cov = build_covariance(locations, shift_params, unit_sigma);
  ArCoefficientField f;
  f.shift = sample_gaussian_field(cov, derive_seed(seed, "shift"));
  f.gamma = ar_coefficients_from_shift(f.shift, n_t, b, rho);
  return f;
}

std::vector<Matrix> scale_ar_coefficients(const std::vector<Matrix>& gammas) {
  if (gammas.empty()) throw InvalidArgument("scale_ar_coefficients: need at least one lag");
  Matrix lag_sum = Matrix::Zero(gammas.front().rows(), gammas.front().cols());
  for (const auto& g : gammas) {
    if (g.rows() != lag_sum.rows() || g.cols() != lag_sum.cols()) {
      throw ShapeError("scale_ar_coefficients: lag fields differ in shape");
    }
    lag_sum += g.cwiseAbs();
  }
  const double denom = (lag_sum.size() > 0 ? lag_sum.maxCoeff() : 0.0) + 0.01;
  std::vector<Matrix> out;
  out.reserve(gammas.size());
  for (const auto& g : gammas) out.push_back(g / denom);
  return out;
}

Index time_segment(Index t, Index n_t) {
  const Index seg = ((t - 1) * kTemporalSegments) / std::max<Index>(n_t, 1);
  return std::clamp<Index>(seg, 0, kTemporalSegments - 1);
}

Index VarianceField::segment(Index location, Index t) const {
  return cluster[static_cast<std::size_t>(location)] * kTemporalSegments +
         time_segment(t, sigma.cols());
}

VarianceField gen_variance_field(const Matrix& locations, Index n_t, std::uint64_t seed,
                                 double low, double high) {
  Rng rng(derive_seed(seed, "variance"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix centers(kSpatialClusters, 2);
  for (Index k = 0; k < kSpatialClusters; ++k) {
    centers(k, 0) = unit(rng);
    centers(k, 1) = unit(rng);
  }
  VarianceField vf;
  vf.segment_sigma.resize(kSpatialClusters * kTemporalSegments);
  std::uniform_real_distribution<double> sd(low, high);
  for (Index k = 0; k < vf.segment_sigma.size(); ++k) vf.segment_sigma(k) = sd(rng);

  vf.cluster.resize(static_cast<std::size_t>(locations.rows()));
  for (Index s = 0; s < locations.rows(); ++s) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < kSpatialClusters; ++k) {
      const double d = (locations.row(s) - centers.row(k)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    vf.cluster[static_cast<std::size_t>(s)] = best;
  }
  vf.sigma.resize(locations.rows(), n_t);
  for (Index s = 0; s < locations.rows(); ++s) {
    for (Index t = 1; t <= n_t; ++t) vf.sigma(s, t - 1) = vf.segment_sigma(vf.segment(s, t));
  }
  return vf;
}

Matrix simulate_ar_fields(const Matrix& locations, Index n_t,
                          const std::vector<std::vector<Matrix>>& ar_coeffs,
                          const std::vector<Matrix>& sigma,
                          const std::vector<MaternParams>& innovation, Index burn_in,
                          std::uint64_t seed) {
  const Index n_s = locations.rows();
  const Index P = static_cast<Index>(ar_coeffs.size());
  if (sigma.size() != ar_coeffs.size() || innovation.empty()) {
    throw ShapeError("simulate_ar_fields: per-component inputs disagree in length");
  }
  Matrix values(n_s * n_t, P);
  for (Index i = 0; i < P; ++i) {
    const auto& gammas = ar_coeffs[static_cast<std::size_t>(i)];
    const Matrix& sd = sigma[static_cast<std::size_t>(i)];
    const Index R = static_cast<Index>(gammas.size());
    const MaternParams mp = innovation[static_cast<std::size_t>(i) % innovation.size()];
    // C_t = D_t R D_t with D_t = diag(σ(·,t)), so its factor is D_t·chol(R).
    const CholeskyFactor chol = cholesky_with_jitter(matern_correlation(locations, mp));
    Rng rng(derive_seed(seed, "innovation", static_cast<std::uint64_t>(i)));
    std::normal_distribution<double> normal(0.0, 1.0);

    // history(:, k) holds δ(t − 1 − k); zero before the burn-in starts.
    Matrix history = Matrix::Zero(n_s, std::max<Index>(R, 1));
    Vector xi(n_s), delta(n_s);
    for (Index t = 1 - burn_in; t <= n_t; ++t) {
      const Index col = std::max<Index>(t, 1) - 1;  // burn-in reuses t = 1 parameters
      for (Index s = 0; s < n_s; ++s) xi(s) = normal(rng);
      delta = sd.col(col).cwiseProduct(chol.lower * xi);
      for (Index r = 0; r < R; ++r) {
        delta += gammas[static_cast<std::size_t>(r)].col(col).cwiseProduct(history.col(r));
      }
      if (!delta.allFinite() || delta.cwiseAbs().maxCoeff() > 1e6) {
        throw SimulationDiverged("AR simulation of component " + std::to_string(i + 1) +
                                 " diverged at t = " + std::to_string(t));
      }
      for (Index r = R - 1; r > 0; --r) history.col(r) = history.col(r - 1);
      history.col(0) = delta;
      if (t >= 1) {
        for (Index s = 0; s < n_s; ++s) values(s * n_t + (t - 1), i) = delta(s);
      }
    }
  }
  return values;
}

LatentField simulate_latents(const SimulationSpec& spec) {
  spec.validate();
  LatentField out;
  out.n_t = spec.n_t;
  out.locations = sample_locations(spec.n_s, spec.seed);
  const Index n_s = spec.n_s, n_t = spec.n_t;

  std::vector<MaternParams> innovation;
  for (Index i = 0; i < spec.P; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const std::uint64_t comp = static_cast<std::uint64_t>(i);
    ComponentDraws draws;
    draws.innovation = spec.matern_params[ui % spec.matern_params.size()];
    draws.shift = spec.shift_params[ui % spec.shift_params.size()];
    innovation.push_back(draws.innovation);

    Rng rng(derive_seed(spec.seed, "ar_params", comp));
    auto unif = [&rng](double lo, double hi) {
      return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    std::vector<Matrix> gammas;
    for (Index r = 0; r < spec.R; ++r) {
      const std::uint64_t stream = comp * 1000 + static_cast<std::uint64_t>(r);
      double rho = 1.0;
      double d = 1.0;
      if (spec.R == 1) {
        rho = spec.nonstationary_ar() ? unif(0.6, 0.99) : unif(0.1, 0.9);
      } else {
        rho = spec.nonstationary_ar() ? 1.0 : unif(0.1, 0.9);
        d = unif(0.0, 1.0);
        draws.d.push_back(d);
      }
      draws.rho.push_back(rho);
      if (spec.nonstationary_ar()) {
        const double b = unif(1.0, 10.0);
        draws.b.push_back(b);
        auto field = gen_ar_coefficient_field(out.locations, n_t, b, draws.shift, rho,
                                              derive_seed(spec.seed, "shift_field", stream));
        gammas.push_back(d * field.gamma);
      } else {
        gammas.push_back(Matrix::Constant(n_s, n_t, d * rho));
      }
    }
    if (spec.R > 1) {
      Matrix lag_sum = Matrix::Zero(n_s, n_t);
      for (const auto& g : gammas) lag_sum += g.cwiseAbs();
      draws.scale_denominator = lag_sum.maxCoeff() + 0.01;
      gammas = scale_ar_coefficients(gammas);
    }
    out.ar_coeffs.push_back(std::move(gammas));

    if (spec.nonstationary_variance()) {
      VarianceField vf = gen_variance_field(out.locations, n_t,
                                            derive_seed(spec.seed, "variance_field", comp),
                                            spec.sigma_low, spec.sigma_high);
      draws.segment_sigma.assign(vf.segment_sigma.data(),
                                 vf.segment_sigma.data() + vf.segment_sigma.size());
      out.variance_field.push_back(std::move(vf.sigma));
    } else {
      out.variance_field.push_back(Matrix::Ones(n_s, n_t));
    }

    if (spec.with_trend()) {
      Trend tr = gen_trend(out.locations, n_t, derive_seed(spec.seed, "trend", comp));
      draws.trend = tr.params;
      out.trend_field.push_back(std::move(tr.values));
    } else {
      out.trend_field.push_back(Matrix::Zero(n_s, n_t));
    }
    out.draws.push_back(std::move(draws));
  }

  out.values = simulate_ar_fields(out.locations, n_t, out.ar_coeffs, out.variance_field,
                                  innovation, spec.burn_in, spec.seed);
  for (Index i = 0; i < spec.P; ++i) {
    const Matrix& mu = out.trend_field[static_cast<std::size_t>(i)];
    for (Index s = 0; s < n_s; ++s)
      for (Index t = 1; t <= n_t; ++t) out.values(out.row(s, t), i) += mu(s, t - 1);
  }
  return out;
}

}  // namespace ivaear::field
