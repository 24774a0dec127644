#include "ivaear/forecast/forecast.hpp"

#include "ivaear/error.hpp"
#include "ivaear/rng.hpp"

#include <map>
#include <tuple>

namespace ivaear::forecast {

namespace {

struct Layout {
  data::LocationIndex index;
  std::vector<std::int64_t> last_time;
};

Layout layout_of(const data::SpatioTemporalDataset& history) {
  history.validate();
  if (history.rows() == 0) throw InvalidArgument("forecast: history is empty");
  Layout l{data::index_locations(history), {}};
  for (const auto& rows : l.index.rows_by_location) {
    l.last_time.push_back(history.times[static_cast<std::size_t>(rows.back())]);
  }
  return l;
}

data::SpatioTemporalDataset future_frame(const Layout& l, Index horizon, Index S) {
  const Index n_loc = l.index.size();
  data::SpatioTemporalDataset out;
  out.coords.resize(n_loc * horizon, 2);
  out.times.resize(static_cast<std::size_t>(n_loc * horizon));
  out.x = Matrix::Zero(n_loc * horizon, S);
  for (Index k = 0; k < n_loc; ++k) {
    for (Index h = 0; h < horizon; ++h) {
      out.coords.row(k * horizon + h) = l.index.sites.row(k);
      out.times[static_cast<std::size_t>(k * horizon + h)] = l.last_time[static_cast<std::size_t>(k)] + h + 1;
    }
  }
  return out;
}

}  // namespace

ForecastResult forecast(const model::IVaeArModel& model, const ForecastRequest& req) {
  if (req.horizon < 1) throw InvalidArgument("forecast: horizon must be >= 1");
  const Layout l = layout_of(req.history);
  const Index n_loc = l.index.size();
  const Index W = model.dims.W;
  const Index P = model.dims.P;
  if (req.history_aux.rows() != req.history.rows()) {
    throw ShapeError("forecast: history auxiliary rows differ from history rows");
  }
  if (req.future_aux.rows() != req.horizon * n_loc) {
    throw ShapeError("forecast: expected " + std::to_string(req.horizon * n_loc) + " future auxiliary rows (horizon " +
                     std::to_string(req.horizon) + " x " + std::to_string(n_loc) + " locations), got " +
                     std::to_string(req.future_aux.rows()));
  }
  for (Index k = 0; k < n_loc; ++k) {
    if (static_cast<Index>(l.index.rows_by_location[static_cast<std::size_t>(k)].size()) < W) {
      throw InvalidArgument("forecast: location " + std::to_string(k + 1) + " has fewer than W=" +
                            std::to_string(W) + " history points");
    }
  }

  // deviations[r](k, ·): encoder mean minus auxiliary mean at lag r+1.
  std::vector<Matrix> deviations(static_cast<std::size_t>(W), Matrix(n_loc, P));
  if (W > 0) {
    const auto enc = model::encode(model, req.history.x, req.history_aux).mean;
    const auto prior = model::aux_heads(model, req.history_aux).mean;
    for (Index k = 0; k < n_loc; ++k) {
      const auto& rows = l.index.rows_by_location[static_cast<std::size_t>(k)];
      for (Index r = 0; r < W; ++r) {
        const Index row = rows[rows.size() - 1 - static_cast<std::size_t>(r)];
        deviations[static_cast<std::size_t>(r)].row(k) = enc.row(row) - prior.row(row);
      }
    }
  }

  std::vector<Rng> rngs;
  if (req.mode == ForecastMode::Sampled) {
    for (Index k = 0; k < n_loc; ++k) rngs.push_back(make_rng(req.seed, "forecast", static_cast<std::uint64_t>(k)));
  }
  std::normal_distribution<double> normal(0.0, 1.0);

  ForecastResult out;
  out.predictions = future_frame(l, req.horizon, model.dims.S);
  out.latents.resize(n_loc * req.horizon, P);
  Matrix u(n_loc, model.dims.m);
  for (Index h = 0; h < req.horizon; ++h) {
    for (Index k = 0; k < n_loc; ++k) u.row(k) = req.future_aux.row(k * req.horizon + h);
    const auto heads = model::aux_heads(model, u);
    Matrix dev = Matrix::Zero(n_loc, P);
    for (Index r = 0; r < W; ++r) {
      dev += heads.gamma[static_cast<std::size_t>(r)].cwiseProduct(deviations[static_cast<std::size_t>(r)]);
    }
    if (req.mode == ForecastMode::Sampled) {
      for (Index k = 0; k < n_loc; ++k)
        for (Index p = 0; p < P; ++p) dev(k, p) += heads.sd(k, p) * normal(rngs[static_cast<std::size_t>(k)]);
    }
    const Matrix z = heads.mean + dev;
    for (Index r = W - 1; r > 0; --r) {
      deviations[static_cast<std::size_t>(r)] = deviations[static_cast<std::size_t>(r - 1)];
    }
    if (W > 0) deviations[0] = dev;
    const Matrix x = model::decode(model, z);
    for (Index k = 0; k < n_loc; ++k) {
      out.latents.row(k * req.horizon + h) = z.row(k);
      out.predictions.x.row(k * req.horizon + h) = x.row(k);
    }
  }
  return out;
}

ForecastRequest make_request(const model::IVaeArModel& model, const data::SpatioTemporalDataset& history,
                             Index horizon, ForecastMode mode, std::uint64_t seed) {
  if (!model.aux_spec) throw InvalidArgument("forecast: model carries no auxiliary spec");
  if (horizon < 1) throw InvalidArgument("forecast: horizon must be >= 1");
  const Layout l = layout_of(history);
  const auto frame = future_frame(l, horizon, model.dims.S);
  ForecastRequest req;
  req.history = history;
  req.history_aux = auxdata::build_auxiliary(*model.aux_spec, history.coords, history.times);
  req.future_aux = auxdata::build_auxiliary(*model.aux_spec, frame.coords, frame.times);
  req.horizon = horizon;
  req.mode = mode;
  req.seed = seed;
  return req;
}

data::SpatioTemporalDataset persistence_baseline(const data::SpatioTemporalDataset& history, Index horizon) {
  if (horizon < 1) throw InvalidArgument("persistence_baseline: horizon must be >= 1");
  const Layout l = layout_of(history);
  auto out = future_frame(l, horizon, history.observed_dim());
  for (Index k = 0; k < l.index.size(); ++k) {
    const Index last = l.index.rows_by_location[static_cast<std::size_t>(k)].back();
    for (Index h = 0; h < horizon; ++h) out.x.row(k * horizon + h) = history.x.row(last);
  }
  return out;
}

std::optional<Matrix> align_truth(const data::SpatioTemporalDataset& predictions,
                                  const data::SpatioTemporalDataset& truth) {
  std::map<std::tuple<double, double, std::int64_t>, Index> where;
  for (Index i = 0; i < truth.rows(); ++i) {
    where.emplace(std::make_tuple(truth.coords(i, 0), truth.coords(i, 1), truth.times[static_cast<std::size_t>(i)]), i);
  }
  Matrix out(predictions.rows(), truth.observed_dim());
  for (Index i = 0; i < predictions.rows(); ++i) {
    auto it = where.find(std::make_tuple(predictions.coords(i, 0), predictions.coords(i, 1),
                                         predictions.times[static_cast<std::size_t>(i)]));
    if (it == where.end()) return std::nullopt;
    out.row(i) = truth.x.row(it->second);
  }
  return out;
}

}  // namespace ivaear::forecast
