#include "ivaear/model/ivaear.hpp"

#include "ivaear/error.hpp"
#include "ivaear/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ivaear::model {

using nn::Activation;
using nn::OutputHead;
using nn::Var;

bool IVaeArModel::operator==(const IVaeArModel& o) const {
  return dims == o.dims && beta == o.beta && encoder == o.encoder && decoder == o.decoder &&
         auxnet == o.auxnet && x_scaler == o.x_scaler && u_scaler == o.u_scaler &&
         aux_spec == o.aux_spec;
}

namespace {

std::vector<Index> layers(Index in, const std::vector<Index>& hidden, Index out) {
  std::vector<Index> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

IVaeArModel model_init(const ModelDims& dims, double beta, std::uint64_t seed,
                       const std::vector<Index>& hidden, const std::vector<Index>& aux_hidden) {
  if (dims.S <= 0 || dims.P <= 0 || dims.m <= 0 || dims.W < 0) {
    throw InvalidArgument("model_init: S, P and m must be positive and W non-negative");
  }
  if (!(beta > 0.0)) throw InvalidArgument("model_init: beta must be positive");
  IVaeArModel m;
  m.dims = dims;
  m.beta = beta;
  const Index P = dims.P;

  m.encoder = nn::mlp_init(layers(dims.S + dims.m, hidden, 2 * P), Activation::LeakyRelu,
                           {{P, Activation::Linear}, {P, Activation::Softplus}},
                           derive_seed(seed, "encoder"));
  m.decoder = nn::mlp_init(layers(P, hidden, dims.S), Activation::LeakyRelu, {},
                           derive_seed(seed, "decoder"));
  std::vector<OutputHead> aux_heads{{P, Activation::Linear}, {P, Activation::Softplus}};
  for (Index r = 0; r < dims.W; ++r) aux_heads.push_back({P, Activation::Linear});
  m.auxnet = nn::mlp_init(layers(dims.m, aux_hidden, (2 + dims.W) * P), Activation::LeakyRelu,
                          std::move(aux_heads), derive_seed(seed, "auxnet"));
  m.x_scaler = auxdata::Standardizer::identity(dims.S);
  m.u_scaler = auxdata::Standardizer::identity(dims.m);
  return m;
}

namespace {

Matrix hconcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

void check_cols(const Matrix& m, Index cols, const char* what) {
  if (m.cols() != cols) {
    throw ShapeError(std::string(what) + " has " + std::to_string(m.cols()) + " columns, expected " +
                     std::to_string(cols));
  }
}

}  // namespace

GaussianHeads encode_std(const IVaeArModel& model, const Matrix& x_std, const Matrix& u_std) {
  check_cols(x_std, model.dims.S, "observation matrix");
  check_cols(u_std, model.dims.m, "auxiliary matrix");
  if (x_std.rows() != u_std.rows()) throw ShapeError("encode: x and u row counts differ");
  auto heads = nn::forward_heads(model.encoder, hconcat(x_std, u_std));
  return {std::move(heads[0]), std::move(heads[1])};
}

AuxHeads aux_heads_std(const IVaeArModel& model, const Matrix& u_std) {
  check_cols(u_std, model.dims.m, "auxiliary matrix");
  auto heads = nn::forward_heads(model.auxnet, u_std);
  AuxHeads out{std::move(heads[0]), std::move(heads[1]), {}};
  for (std::size_t r = 2; r < heads.size(); ++r) out.gamma.push_back(std::move(heads[r]));
  return out;
}

GaussianHeads encode(const IVaeArModel& model, const Matrix& x, const Matrix& u) {
  check_cols(x, model.dims.S, "observation matrix");
  check_cols(u, model.dims.m, "auxiliary matrix");
  return encode_std(model, model.x_scaler.apply(x), model.u_scaler.apply(u));
}

AuxHeads aux_heads(const IVaeArModel& model, const Matrix& u) {
  check_cols(u, model.dims.m, "auxiliary matrix");
  return aux_heads_std(model, model.u_scaler.apply(u));
}

Matrix decode(const IVaeArModel& model, const Matrix& z) {
  check_cols(z, model.dims.P, "latent matrix");
  return model.x_scaler.invert(nn::forward(model.decoder, z));
}

Matrix standard_normal(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

Matrix reparameterize(const Matrix& mean, const Matrix& sd, const Matrix& noise) {
  if (mean.rows() != sd.rows() || mean.cols() != sd.cols() || noise.rows() != mean.rows() ||
      noise.cols() != mean.cols()) {
    throw ShapeError("reparameterize: mean, sd and noise shapes differ");
  }
  return mean + sd.cwiseProduct(noise);
}

Matrix reparameterize(const Matrix& mean, const Matrix& sd, std::uint64_t noise_seed) {
  return reparameterize(mean, sd, standard_normal(mean.rows(), mean.cols(), noise_seed));
}

GaussianHeads prior_params(const IVaeArModel& model, const Matrix& u,
                           const std::vector<Matrix>& u_lags, const std::vector<Matrix>& x_lags) {
  const Index W = model.dims.W;
  if (static_cast<Index>(u_lags.size()) != W || static_cast<Index>(x_lags.size()) != W) {
    throw InvalidArgument("prior_params: expected " + std::to_string(W) + " lags, got " +
                          std::to_string(u_lags.size()) + " auxiliary and " +
                          std::to_string(x_lags.size()) + " observation lags");
  }
  AuxHeads now = aux_heads(model, u);
  Matrix mean = now.mean;
  for (Index r = 0; r < W; ++r) {
    const auto ur = static_cast<std::size_t>(r);
    if (u_lags[ur].rows() != u.rows() || x_lags[ur].rows() != u.rows()) {
      throw ShapeError("prior_params: lag " + std::to_string(r + 1) + " has wrong row count");
    }
    const Matrix lag_post = encode(model, x_lags[ur], u_lags[ur]).mean;
    const Matrix lag_prior = aux_heads(model, u_lags[ur]).mean;
    mean += now.gamma[ur].cwiseProduct(lag_post - lag_prior);
  }
  return {std::move(mean), std::move(now.sd)};
}

LaggedBatch make_batch(const Matrix& x_std, const Matrix& u_std, const data::IndexMatrix& lags,
                       std::span<const Index> rows, Index W) {
  const auto B = static_cast<Index>(rows.size());
  LaggedBatch b;
  b.x.resize(B, x_std.cols());
  b.u.resize(B, u_std.cols());
  b.x_lags.assign(static_cast<std::size_t>(W), Matrix(B, x_std.cols()));
  b.u_lags.assign(static_cast<std::size_t>(W), Matrix(B, u_std.cols()));
  for (Index k = 0; k < B; ++k) {
    const Index row = rows[static_cast<std::size_t>(k)];
    b.x.row(k) = x_std.row(row);
    b.u.row(k) = u_std.row(row);
    for (Index r = 0; r < W; ++r) {
      const Index lag_row = lags(row, r);
      if (lag_row < 0) {
        throw InvalidArgument("make_batch: row " + std::to_string(row) + " is missing lag " +
                              std::to_string(r + 1));
      }
      b.x_lags[static_cast<std::size_t>(r)].row(k) = x_std.row(lag_row);
      b.u_lags[static_cast<std::size_t>(r)].row(k) = u_std.row(lag_row);
    }
  }
  return b;
}

namespace {

struct RecordedElbo {
  Var elbo, reconstruction, log_prior, log_posterior;
  nn::BoundNetwork encoder, decoder, auxnet;
};

RecordedElbo record_elbo(nn::Tape& tape, const IVaeArModel& model, const LaggedBatch& batch,
                         const Matrix& noise) {
  const auto& d = model.dims;
  const Index B = batch.size();
  const Index W = d.W;
  check_cols(batch.x, d.S, "batch observations");
  check_cols(batch.u, d.m, "batch auxiliary data");
  if (batch.u.rows() != B || static_cast<Index>(batch.x_lags.size()) != W ||
      static_cast<Index>(batch.u_lags.size()) != W) {
    throw InvalidArgument("elbo: batch is missing lags or has inconsistent rows");
  }
  if (noise.rows() != B || noise.cols() != d.P) {
    throw ShapeError("elbo: noise must be batch_size x P");
  }

  // Targets and all lags go through the encoder and auxiliary network in one
  // stacked pass: rows [r·B, (r+1)·B) hold lag r.
  Matrix enc_in(B * (W + 1), d.S + d.m);
  Matrix aux_in(B * (W + 1), d.m);
  enc_in.topRows(B) << batch.x, batch.u;
  aux_in.topRows(B) = batch.u;
  for (Index r = 1; r <= W; ++r) {
    const auto ur = static_cast<std::size_t>(r - 1);
    if (batch.x_lags[ur].rows() != B || batch.u_lags[ur].rows() != B) {
      throw ShapeError("elbo: lag " + std::to_string(r) + " has wrong row count");
    }
    enc_in.middleRows(r * B, B) << batch.x_lags[ur], batch.u_lags[ur];
    aux_in.middleRows(r * B, B) = batch.u_lags[ur];
  }

  RecordedElbo rec;
  rec.encoder = nn::bind(tape, model.encoder);
  rec.decoder = nn::bind(tape, model.decoder);
  rec.auxnet = nn::bind(tape, model.auxnet);

  const auto enc = nn::forward(rec.encoder, tape.constant(std::move(enc_in)));
  const auto aux = nn::forward(rec.auxnet, tape.constant(std::move(aux_in)));
  auto rows = [&](Var v, Index r) { return W == 0 ? v : nn::block(v, r * B, 0, B, d.P); };

  const Var mu_q = rows(enc[0], 0);
  const Var sd_q = rows(enc[1], 0);
  const Var z = mu_q + sd_q * tape.constant(noise);

  Var mu_star = rows(aux[0], 0);
  for (Index r = 1; r <= W; ++r) {
    const Var gamma = rows(aux[static_cast<std::size_t>(1 + r)], 0);
    mu_star = mu_star + gamma * (rows(enc[0], r) - rows(aux[0], r));
  }
  const Var sd_p = rows(aux[1], 0);
  const Var x_rec = nn::forward(rec.decoder, z)[0];

  const double log2pi = std::log(2.0 * std::numbers::pi);
  const double n = static_cast<double>(B);
  const double latent_const = -0.5 * log2pi * n * static_cast<double>(d.P);

  rec.reconstruction = nn::sum(nn::square(tape.constant(batch.x) - x_rec)) * (-0.5 / model.beta) +
                       (-0.5 * static_cast<double>(d.S) * std::log(2.0 * std::numbers::pi * model.beta) * n);
  rec.log_prior = -nn::sum(nn::log(sd_p)) - 0.5 * nn::sum(nn::square((z - mu_star) / sd_p)) +
                  latent_const;
  rec.log_posterior = -nn::sum(nn::log(sd_q)) - 0.5 * nn::sum(nn::square((z - mu_q) / sd_q)) +
                      latent_const;
  rec.elbo = (rec.reconstruction + rec.log_prior - rec.log_posterior) * (1.0 / n);
  return rec;
}

ElboTerms terms_of(const RecordedElbo& r, Index B) {
  const double n = static_cast<double>(B);
  return {r.elbo.value()(0, 0), r.reconstruction.value()(0, 0) / n, r.log_prior.value()(0, 0) / n,
          r.log_posterior.value()(0, 0) / n};
}

}  // namespace

ElboTerms elbo_terms(const IVaeArModel& model, const LaggedBatch& batch, const Matrix& noise) {
  nn::Tape tape;
  return terms_of(record_elbo(tape, model, batch, noise), batch.size());
}

double elbo(const IVaeArModel& model, const LaggedBatch& batch, const Matrix& noise) {
  return elbo_terms(model, batch, noise).elbo;
}

double elbo(const IVaeArModel& model, const LaggedBatch& batch, std::uint64_t noise_seed) {
  return elbo(model, batch, standard_normal(batch.size(), model.dims.P, noise_seed));
}

ElboGradient elbo_gradient(const IVaeArModel& model, const LaggedBatch& batch, const Matrix& noise) {
  nn::Tape tape;
  const RecordedElbo rec = record_elbo(tape, model, batch, noise);
  tape.backward(rec.elbo);
  return {terms_of(rec, batch.size()), nn::gradients(rec.encoder), nn::gradients(rec.decoder),
          nn::gradients(rec.auxnet)};
}

std::vector<std::span<double>> parameter_spans(IVaeArModel& model) {
  auto spans = nn::parameter_spans(model.encoder);
  for (auto s : nn::parameter_spans(model.decoder)) spans.push_back(s);
  for (auto s : nn::parameter_spans(model.auxnet)) spans.push_back(s);
  return spans;
}

std::vector<std::span<const double>> gradient_spans(const ElboGradient& grad) {
  auto spans = nn::gradient_spans(grad.encoder);
  for (auto s : nn::gradient_spans(grad.decoder)) spans.push_back(s);
  for (auto s : nn::gradient_spans(grad.auxnet)) spans.push_back(s);
  return spans;
}

namespace {

void negate(nn::NetworkGrad& g) {
  for (auto& w : g.weights) w = -w;
  for (auto& b : g.biases) b = -b;
}

}  // namespace

TrainResult train(IVaeArModel model, const data::SpatioTemporalDataset& data, const Matrix& aux,
                  const TrainingConfig& config) {
  data.validate();
  if (config.epochs < 1) throw InvalidArgument("train: epochs must be >= 1");
  if (config.batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  check_cols(data.x, model.dims.S, "observation matrix");
  check_cols(aux, model.dims.m, "auxiliary matrix");
  if (aux.rows() != data.rows()) throw ShapeError("train: auxiliary rows differ from data rows");

  const Index W = model.dims.W;
  model.x_scaler = config.standardize_x ? auxdata::Standardizer::fit(data.x)
                                        : auxdata::Standardizer::identity(data.x.cols());
  model.u_scaler = auxdata::Standardizer::fit(aux);
  const Matrix x_std = model.x_scaler.apply(data.x);
  const Matrix u_std = model.u_scaler.apply(aux);

  const auto index = data::index_locations(data);
  const auto lags = data::lag_table(data, index, W);
  const std::vector<Index> eligible = data::eligible_rows(lags);
  if (eligible.empty()) {
    throw InvalidArgument("train: no observation has " + std::to_string(W) +
                          " preceding time points at its location");
  }

  nn::AdamState state;
  state.config = config.adam;
  TrainResult result;
  std::vector<Index> order = eligible;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t len = std::min(order.size() - start, static_cast<std::size_t>(config.batch_size));
      const std::span<const Index> rows(order.data() + start, len);
      const LaggedBatch batch = make_batch(x_std, u_std, lags, rows, W);
      const Matrix noise = standard_normal(batch.size(), model.dims.P,
                                           derive_seed(config.seed, "noise", static_cast<std::uint64_t>(step)));
      ElboGradient g = elbo_gradient(model, batch, noise);
      bool finite = std::isfinite(g.terms.elbo);
      for (auto s : gradient_spans(g)) {
        for (double v : s) finite = finite && std::isfinite(v);
      }
      if (!finite) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch + 1 << ", step " << step + 1
            << ": elbo=" << g.terms.elbo << " reconstruction=" << g.terms.reconstruction
            << " log_prior=" << g.terms.log_prior << " log_posterior=" << g.terms.log_posterior;
        throw TrainingDiverged(msg.str());
      }
      total += g.terms.elbo * static_cast<double>(len);
      negate(g.encoder);
      negate(g.decoder);
      negate(g.auxnet);
      nn::adam_step(parameter_spans(model), gradient_spans(g), state);
      ++step;
    }
    const double mean = total / static_cast<double>(order.size());
    result.elbo_trace.push_back(mean);
    if (config.on_epoch) config.on_epoch(epoch + 1, mean);
  }
  result.model = std::move(model);
  return result;
}

TrainResult fit(const data::SpatioTemporalDataset& data, const Matrix& aux, Index P,
                const TrainingConfig& config) {
  const ModelDims dims{data.observed_dim(), P, config.W, aux.cols()};
  IVaeArModel m = model_init(dims, config.beta, derive_seed(config.seed, "init"), config.hidden,
                             config.aux_hidden);
  return train(std::move(m), data, aux, config);
}

Matrix extract_latents(const IVaeArModel& model, const data::SpatioTemporalDataset& data,
                       const Matrix& aux) {
  check_cols(data.x, model.dims.S, "observation matrix");
  if (aux.rows() != data.rows()) throw ShapeError("extract_latents: auxiliary rows differ from data rows");
  return encode(model, data.x, aux).mean;
}

std::optional<std::size_t> knee_index(std::span<const double> curve, double tolerance) {
  if (curve.size() < 3) throw InvalidArgument("knee detection needs at least 3 points");
  double scale = 1.0;
  for (double v : curve) scale = std::max(scale, std::abs(v));
  std::optional<std::size_t> best;
  double best_bend = tolerance * scale;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    const double bend = -(curve[i + 1] - 2.0 * curve[i] + curve[i - 1]);
    if (bend > best_bend) {
      best_bend = bend;
      best = i;
    }
  }
  return best;
}

SweepResult dimension_sweep(const data::SpatioTemporalDataset& data, const Matrix& aux,
                            std::span<const Index> latent_dims, const TrainingConfig& config) {
  if (latent_dims.size() < 3) throw InvalidArgument("dimension_sweep: need at least 3 latent dimensions");
  if (!std::is_sorted(latent_dims.begin(), latent_dims.end())) {
    throw InvalidArgument("dimension_sweep: latent dimensions must be ascending");
  }
  SweepResult out;
  for (Index P : latent_dims) {
    TrainResult r = fit(data, aux, P, config);
    out.latent_dims.push_back(P);
    out.final_elbo.push_back(r.elbo_trace.back());
  }
  if (auto k = knee_index(out.final_elbo)) out.knee = out.latent_dims[*k];
  return out;
}

}  // namespace ivaear::model
