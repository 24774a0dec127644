#pragma once

#include "ivaear/auxdata/auxiliary.hpp"
#include "ivaear/data/dataset.hpp"
#include "ivaear/nn/adam.hpp"
#include "ivaear/nn/network.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace ivaear::model {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct ModelDims {
  Index S = 0;  // observed dimension
  Index P = 0;  // latent dimension
  Index W = 0;  // model AR order; 0 is the plain iVAE
  Index m = 0;  // auxiliary dimension

  bool operator==(const ModelDims&) const = default;
};

/// Encoder g(x,u) → (μ_{z|x,u}, σ_{z|x,u}); decoder h(z) → x';
/// auxiliary network w(u) → (μ_{z|u}, σ_{z|u}, γ¹..γ^W).
///
/// The networks see standardized inputs. x_scaler and u_scaler hold the
/// training statistics and are applied by every function that accepts raw
/// observations or auxiliary rows.
struct IVaeArModel {
  ModelDims dims;
  double beta = 1.0;
  nn::NetworkParams encoder;
  nn::NetworkParams decoder;
  nn::NetworkParams auxnet;
  auxdata::Standardizer x_scaler;
  auxdata::Standardizer u_scaler;
  std::optional<auxdata::AuxiliarySpec> aux_spec;

  bool operator==(const IVaeArModel&) const;
};

inline const std::vector<Index> kDefaultHidden{128, 128, 128};

IVaeArModel model_init(const ModelDims& dims, double beta, std::uint64_t seed,
                       const std::vector<Index>& hidden = kDefaultHidden,
                       const std::vector<Index>& aux_hidden = kDefaultHidden);

/// Standard deviation heads; all entries >= the softplus floor.
struct GaussianHeads {
  Matrix mean;
  Matrix sd;
};

struct AuxHeads {
  Matrix mean;
  Matrix sd;
  std::vector<Matrix> gamma;  // W entries
};

/// Raw-space entry points (scalers applied internally).
GaussianHeads encode(const IVaeArModel& model, const Matrix& x, const Matrix& u);
AuxHeads aux_heads(const IVaeArModel& model, const Matrix& u);
/// Decoded observations in raw data units.
Matrix decode(const IVaeArModel& model, const Matrix& z);

/// Model-space (standardized input) variants.
GaussianHeads encode_std(const IVaeArModel& model, const Matrix& x_std, const Matrix& u_std);
AuxHeads aux_heads_std(const IVaeArModel& model, const Matrix& u_std);

/// z' = μ + σ ⊙ ε.
Matrix reparameterize(const Matrix& mean, const Matrix& sd, const Matrix& noise);
Matrix reparameterize(const Matrix& mean, const Matrix& sd, std::uint64_t noise_seed);
Matrix standard_normal(Index rows, Index cols, std::uint64_t seed);

/// μ* = μ_{z|u}(u^t) + Σ_r γ^r(u^t) ⊙ (μ_{z|x,u}(x^{t−r},u^{t−r}) − μ_{z|u}(u^{t−r}))
/// with σ = σ_{z|u}(u^t). Raw-space inputs; lag r is element r−1.
GaussianHeads prior_params(const IVaeArModel& model, const Matrix& u,
                           const std::vector<Matrix>& u_lags, const std::vector<Matrix>& x_lags);

/// Batch in model space: standardized x and u at the target time and at each
/// lag (lag r at index r−1), same location.
struct LaggedBatch {
  Matrix x;
  Matrix u;
  std::vector<Matrix> x_lags;
  std::vector<Matrix> u_lags;

  Index size() const { return x.rows(); }
};

LaggedBatch make_batch(const Matrix& x_std, const Matrix& u_std, const data::IndexMatrix& lags,
                       std::span<const Index> rows, Index W);

struct ElboTerms {
  double elbo = 0;            // mean per batch element
  double reconstruction = 0;  // mean log p(x|z')
  double log_prior = 0;       // mean log p(z'|z⁻,u)
  double log_posterior = 0;   // mean log q(z'|x,u)
};

/// One-sample ELBO averaged over the batch with the given standard normal
/// noise (size × P).
ElboTerms elbo_terms(const IVaeArModel& model, const LaggedBatch& batch, const Matrix& noise);
double elbo(const IVaeArModel& model, const LaggedBatch& batch, const Matrix& noise);
double elbo(const IVaeArModel& model, const LaggedBatch& batch, std::uint64_t noise_seed);

struct ElboGradient {
  ElboTerms terms;
  nn::NetworkGrad encoder;
  nn::NetworkGrad decoder;
  nn::NetworkGrad auxnet;
};

/// Exact reverse-mode gradient of elbo() w.r.t. every network parameter.
ElboGradient elbo_gradient(const IVaeArModel& model, const LaggedBatch& batch, const Matrix& noise);

/// Parameter views of all three networks (encoder, decoder, auxnet order).
std::vector<std::span<double>> parameter_spans(IVaeArModel& model);
std::vector<std::span<const double>> gradient_spans(const ElboGradient& grad);

struct TrainingConfig {
  int epochs = 60;
  Index batch_size = 64;
  std::uint64_t seed = 0;
  double beta = 1.0;
  Index W = 1;
  bool standardize_x = false;  // true fits a per-column scaler on x as well
  std::vector<Index> hidden = kDefaultHidden;
  std::vector<Index> aux_hidden = kDefaultHidden;
  nn::AdamConfig adam;
  std::function<void(int epoch, double mean_elbo)> on_epoch;
};

struct TrainResult {
  IVaeArModel model;
  std::vector<double> elbo_trace;  // mean ELBO per epoch
};

/// Fits the scalers on (data.x, aux), then maximizes the ELBO with Adam over
/// shuffled lagged batches. Rows without all W lags only serve as lags.
TrainResult train(IVaeArModel model, const data::SpatioTemporalDataset& data, const Matrix& aux,
                  const TrainingConfig& config);

/// model_init with dims taken from the data and config, then train().
TrainResult fit(const data::SpatioTemporalDataset& data, const Matrix& aux, Index P,
                const TrainingConfig& config);

/// Posterior means μ_{z|x,u} for every row.
Matrix extract_latents(const IVaeArModel& model, const data::SpatioTemporalDataset& data,
                       const Matrix& aux);

/// Index of the strongest concave bend: argmax over interior points of
/// −(e[i+1] − 2e[i] + e[i−1]). Empty when no interior point bends by more
/// than `tolerance` (e.g. a straight line).
std::optional<std::size_t> knee_index(std::span<const double> curve, double tolerance = 1e-9);

struct SweepResult {
  std::vector<Index> latent_dims;
  std::vector<double> final_elbo;
  std::optional<Index> knee;  // latent dimension at the knee
};

SweepResult dimension_sweep(const data::SpatioTemporalDataset& data, const Matrix& aux,
                            std::span<const Index> latent_dims, const TrainingConfig& config);

}  // namespace ivaear::model
