#pragma once

#include "ivaear/model/ivaear.hpp"
#include "ivaear/nn/adam.hpp"
#include "ivaear/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ivaear::testing {

using model::Index;
using model::Matrix;

inline Matrix gaussian(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
  return model::standard_normal(r, c, seed) * scale;
}

/// Batch of random standardized rows with W lags.
inline model::LaggedBatch random_batch(Index B, Index S, Index m, Index W, std::uint64_t seed) {
  model::LaggedBatch b;
  b.x = gaussian(B, S, derive_seed(seed, "x"));
  b.u = gaussian(B, m, derive_seed(seed, "u"));
  for (Index r = 0; r < W; ++r) {
    b.x_lags.push_back(gaussian(B, S, derive_seed(seed, "xl", static_cast<std::uint64_t>(r))));
    b.u_lags.push_back(gaussian(B, m, derive_seed(seed, "ul", static_cast<std::uint64_t>(r))));
  }
  return b;
}

/// Hidden-layer-free model: encoder mean = x, decoder = identity, auxnet
/// heads constant (μ = mu, σ = softplus(sd_bias) + floor, γ_r = gamma[r]).
/// S = P; the m auxiliary columns are ignored.
inline model::IVaeArModel linear_model(Index P, const std::vector<double>& gamma, double mu, double sd_bias,
                                       Index m_aux = 1) {
  const auto W = static_cast<Index>(gamma.size());
  auto m = model::model_init({P, P, W, m_aux}, 1.0, 1, {}, {});
  m.encoder.weights[0].setZero();
  m.encoder.weights[0].topLeftCorner(P, P) = Matrix::Identity(P, P);
  m.encoder.biases[0].setZero();
  m.encoder.biases[0].tail(P).setConstant(-20.0);
  m.decoder.weights[0] = Matrix::Identity(P, P);
  m.decoder.biases[0].setZero();
  m.auxnet.weights[0].setZero();
  auto& b = m.auxnet.biases[0];
  b.head(P).setConstant(mu);
  b.segment(P, P).setConstant(sd_bias);
  for (Index r = 0; r < W; ++r) b.segment((2 + r) * P, P).setConstant(gamma[static_cast<std::size_t>(r)]);
  return m;
}

/// A W-lag model with every γ head zeroed and the W = 0 model that shares all
/// remaining parameters.
struct ZeroGammaPair {
  model::IVaeArModel ar;
  model::IVaeArModel plain;
};

inline ZeroGammaPair zero_gamma_pair(Index S, Index P, Index W, Index m, std::uint64_t seed,
                                     const std::vector<Index>& hidden) {
  ZeroGammaPair out;
  out.ar = model::model_init({S, P, W, m}, 0.7, seed, hidden, hidden);
  auto& last_w = out.ar.auxnet.weights.back();
  auto& last_b = out.ar.auxnet.biases.back();
  Rng rng(derive_seed(seed, "bias"));
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  for (auto& bias : out.ar.encoder.biases)
    for (Index i = 0; i < bias.size(); ++i) bias(i) = unif(rng);
  for (Index i = 0; i < last_b.size(); ++i) last_b(i) = unif(rng);
  last_w.bottomRows(W * P).setZero();
  last_b.tail(W * P).setZero();
  out.plain = out.ar;
  out.plain.dims.W = 0;
  auto& pw = out.plain.auxnet.weights.back();
  auto& pb = out.plain.auxnet.biases.back();
  pw = Matrix(last_w.topRows(2 * P));
  pb = Eigen::VectorXd(last_b.head(2 * P));
  out.plain.auxnet.layer_sizes.back() = 2 * P;
  out.plain.auxnet.heads.resize(2);
  return out;
}

inline double max_rel_error(const std::vector<std::span<const double>>& a,
                            const std::vector<Eigen::VectorXd>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].size(); ++k) {
      const double x = a[i][k], y = b[i](static_cast<Index>(k));
      worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-6}));
    }
  }
  return worst;
}

/// Random tiny model (at most 3 layers per network, at most 8 units), random
/// batch and frozen noise; returns the worst relative error between the
/// tape gradient of the ELBO and central differences.
inline double elbo_gradient_check(std::uint64_t trial) {
  Rng rng(derive_seed(trial, "grad_trial"));
  std::uniform_int_distribution<Index> small(1, 4), units(2, 8), depth(0, 2), lags(0, 2);
  const Index S = small(rng), P = small(rng), m = small(rng), W = lags(rng);
  std::vector<Index> hidden(static_cast<std::size_t>(depth(rng)));
  for (auto& h : hidden) h = units(rng);
  std::vector<Index> aux_hidden(static_cast<std::size_t>(depth(rng)));
  for (auto& h : aux_hidden) h = units(rng);
  std::uniform_real_distribution<double> beta_dist(0.1, 2.0);
  auto model = model::model_init({S, P, W, m}, beta_dist(rng), trial, hidden, aux_hidden);
  // Central differences straddling a leaky-ReLU kink are not a valid oracle,
  // so hidden layers use the smooth activations here.
  const auto smooth = trial % 2 ? nn::Activation::Elu : nn::Activation::Softplus;
  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto* net : {&model.encoder, &model.decoder, &model.auxnet}) {
    net->hidden_activation = smooth;
    for (auto& b : net->biases)
      for (Index i = 0; i < b.size(); ++i) b(i) = normal(rng);
  }
  const Index B = 5;
  const auto batch = random_batch(B, S, m, W, derive_seed(trial, "batch"));
  const Matrix noise = gaussian(B, P, derive_seed(trial, "noise"));
  const auto g = model::elbo_gradient(model, batch, noise);
  const auto fd = nn::finite_diff_gradient([&] { return model::elbo(model, batch, noise); },
                                           model::parameter_spans(model), 1e-5);
  return max_rel_error(model::gradient_spans(g), fd);
}

/// Closed-form KL(q ‖ p) for diagonal Gaussians, summed over columns and
/// averaged over rows.
inline double gaussian_kl(const Matrix& mq, const Matrix& sq, const Matrix& mp, const Matrix& sp) {
  const auto r = (sp.array() / sq.array()).log() +
                 (sq.array().square() + (mq - mp).array().square()) / (2.0 * sp.array().square()) - 0.5;
  return r.sum() / static_cast<double>(mq.rows());
}

struct KlCheck {
  double monte_carlo = 0;
  double closed_form = 0;
};

/// One (x, u, lags) row replicated over `samples` noise draws, so the batch
/// mean of log q − log p is a Monte Carlo KL estimate. Scale heads are fixed
/// (posterior 0.8, prior 1.0) and the prior mean is pushed about 2 units
/// away, which keeps the estimator's relative standard error near 0.5%.
inline KlCheck monte_carlo_kl(std::uint64_t seed, Index samples = 10000) {
  auto m = model::model_init({3, 3, 1, 2}, 1.0, seed, {8}, {8});
  const double b_q = std::log(std::expm1(0.8)), b_p = std::log(std::expm1(1.0));
  m.encoder.weights.back().bottomRows(3).setZero();
  m.encoder.biases.back().tail(3).setConstant(b_q);
  m.auxnet.weights.back().middleRows(3, 3).setZero();
  m.auxnet.biases.back().segment(3, 3).setConstant(b_p);
  m.auxnet.biases.back().head(3).array() += 2.0;
  const auto one = random_batch(1, 3, 2, 1, derive_seed(seed, "kl_row"));
  model::LaggedBatch b;
  b.x = one.x.replicate(samples, 1);
  b.u = one.u.replicate(samples, 1);
  b.x_lags = {one.x_lags[0].replicate(samples, 1)};
  b.u_lags = {one.u_lags[0].replicate(samples, 1)};
  const auto t = model::elbo_terms(m, b, gaussian(samples, 3, derive_seed(seed, "kl_noise")));
  const auto q = model::encode(m, one.x, one.u);
  const auto p = model::prior_params(m, one.u, one.u_lags, one.x_lags);
  return {t.log_posterior - t.log_prior, gaussian_kl(q.mean, q.sd, p.mean, p.sd)};
}

}  // namespace ivaear::testing
