#pragma once

#include "ivaear/field/covariance.hpp"

#include <cstdint>
#include <vector>

namespace ivaear::field {

/// Default Matérn parameters of the innovation fields, one per latent
/// component (cycled when P exceeds the table).
const std::vector<MaternParams>& default_innovation_matern();

/// Default Matérn parameters of the AR-coefficient shift fields c(s).
const std::vector<MaternParams>& default_shift_matern();

struct SimulationSpec {
  int setting = 1;  // 1..6
  Index P = 6;
  Index S = 6;
  Index n_s = 100;
  Index n_t = 500;
  Index R = 1;
  Index L = 1;
  std::uint64_t seed = 0;
  std::vector<MaternParams> matern_params = default_innovation_matern();
  std::vector<MaternParams> shift_params = default_shift_matern();
  Index burn_in = 100;
  double sigma_low = 0.1;
  double sigma_high = 3.0;

  bool with_trend() const { return setting % 2 == 0; }
  bool nonstationary_ar() const { return setting == 1 || setting == 2 || setting == 5 || setting == 6; }
  bool nonstationary_variance() const { return setting >= 3; }

  void validate() const;
};

struct TrendParams {
  double theta_s1 = 0, theta_s2 = 0, theta_t = 0;
  double omega_s1 = 0, omega_s2 = 0, omega_t = 0, omega_c = 0;
  double alpha = 0;
};

/// θ_{s1}s1 + θ_{s2}s2 + θ_t t + α·sin(ω_{s1}s1 + ω_{s2}s2 + ω_t t + ω_c) on
/// every (location, t = 1..n_t); result is n_s × n_t.
Matrix trend_field(const Matrix& locations, Index n_t, const TrendParams& p);

TrendParams sample_trend_params(std::uint64_t seed);

struct Trend {
  TrendParams params;
  Matrix values;  // n_s × n_t
};

Trend gen_trend(const Matrix& locations, Index n_t, std::uint64_t seed);

/// γ(s,t) = ρ·cos(2πtb/n_t − c(s)) for t = 1..n_t; n_s × n_t.
Matrix ar_coefficients_from_shift(const Vector& shift, Index n_t, double b, double rho);

struct ArCoefficientField {
  Vector shift;   // c(s)
  Matrix gamma;   // n_s × n_t
};

/// Draws c(s) from a zero-mean Gaussian field with variance 0.3 and the given
/// Matérn correlation, then evaluates ar_coefficients_from_shift.
ArCoefficientField gen_ar_coefficient_field(const Matrix& locations, Index n_t, double b,
                                            MaternParams shift_params, double rho,
                                            std::uint64_t seed);

/// Divides every lag's field by max_{s,t} Σ_r |γ_r(s,t)| + 0.01 so that the
/// lag sum stays below one everywhere. All lags share the denominator.
std::vector<Matrix> scale_ar_coefficients(const std::vector<Matrix>& gammas);

inline constexpr Index kSpatialClusters = 5;
inline constexpr Index kTemporalSegments = 10;

struct VarianceField {
  std::vector<Index> cluster;  // spatial cluster of each location
  Vector segment_sigma;        // σ_k, k = cluster·10 + time segment
  Matrix sigma;                // n_s × n_t

  Index segment(Index location, Index t) const;  // t is 1-based
};

/// Time segment (0..9) of a 1-based time index.
Index time_segment(Index t, Index n_t);

/// Voronoi cells of 5 uniform seed points × 10 equal time segments, each of
/// the 50 cells with its own σ_k ~ U(low, high).
VarianceField gen_variance_field(const Matrix& locations, Index n_t, std::uint64_t seed,
                                 double low = 0.1, double high = 3.0);

struct ComponentDraws {
  MaternParams innovation;
  MaternParams shift;
  std::vector<double> rho;    // per lag
  std::vector<double> b;      // per lag (nonstationary AR only)
  std::vector<double> d;      // per lag magnitude multipliers (R > 1 only)
  double scale_denominator = 1.0;
  std::vector<double> segment_sigma;
  TrendParams trend;
};

/// Simulated latent fields. Rows of `values` are ordered location-major:
/// row = s·n_t + (t − 1).
struct LatentField {
  Matrix locations;                          // n_s × 2
  Index n_t = 0;
  Matrix values;                             // (n_s·n_t) × P
  std::vector<std::vector<Matrix>> ar_coeffs;  // [component][lag] n_s × n_t
  std::vector<Matrix> variance_field;          // [component] n_s × n_t
  std::vector<Matrix> trend_field;             // [component] n_s × n_t
  std::vector<ComponentDraws> draws;

  Index row(Index location, Index t) const { return location * n_t + (t - 1); }
};

/// Separable vector AR simulation with `burn_in` discarded steps, driven by
/// variance-modulated Matérn innovations; see SimulationSpec::setting for
/// which of trend / variance / AR coefficient are nonstationary.
LatentField simulate_latents(const SimulationSpec& spec);

/// Same as above with externally supplied AR coefficients ([component][lag],
/// n_s × n_t) and standard deviations ([component], n_s × n_t). No trend.
Matrix simulate_ar_fields(const Matrix& locations, Index n_t,
                          const std::vector<std::vector<Matrix>>& ar_coeffs,
                          const std::vector<Matrix>& sigma,
                          const std::vector<MaternParams>& innovation, Index burn_in,
                          std::uint64_t seed);

}  // namespace ivaear::field
