#include "../common/fixtures.hpp"

#include "ivaear/error.hpp"
#include "ivaear/eval/metrics.hpp"
#include "ivaear/forecast/forecast.hpp"

#include <doctest.h>

#include <cmath>

using namespace ivaear;
using ivaear::forecast::ForecastMode;
using ivaear::forecast::ForecastRequest;
using ivaear::forecast::align_truth;
using ivaear::forecast::make_request;
using ivaear::forecast::persistence_baseline;
using ivaear::testing::gaussian;
using Eigen::Index;
using Matrix = Eigen::MatrixXd;

namespace {

/// n_loc locations at distinct sites, times 1..n_t each, random x.
data::SpatioTemporalDataset history(Index n_loc, Index n_t, Index S, std::uint64_t seed) {
  data::SpatioTemporalDataset d;
  d.coords.resize(n_loc * n_t, 2);
  d.x = gaussian(n_loc * n_t, S, seed);
  for (Index k = 0; k < n_loc; ++k)
    for (Index t = 0; t < n_t; ++t) {
      d.coords.row(k * n_t + t) << static_cast<double>(k + 1) / static_cast<double>(n_loc + 1), 0.5;
      d.times.push_back(t + 1);
    }
  return d;
}

ForecastRequest request(const data::SpatioTemporalDataset& h, Index horizon, Index m = 1) {
  ForecastRequest r;
  r.history = h;
  r.history_aux = Matrix::Ones(h.rows(), m);
  const auto n_loc = data::index_locations(h).size();
  r.future_aux = Matrix::Ones(n_loc * horizon, m);
  r.horizon = horizon;
  return r;
}

}  // namespace

TEST_CASE("zero gamma forecasts the auxiliary mean") {
  const Index P = 2;
  auto m = testing::linear_model(P, {0.0}, 1.25, 0.0);
  const auto h = history(3, 5, P, 1);
  const auto r = forecast::forecast(m, request(h, 4));
  CHECK(r.predictions.rows() == 12);
  CHECK((r.predictions.x.array() - 1.25).abs().maxCoeff() < 1e-15);
  auto other = h;
  other.x = gaussian(h.rows(), P, 99);
  CHECK(forecast::forecast(m, request(other, 4)).predictions.x == r.predictions.x);
}

TEST_CASE("unit root carries the last deviation forward") {
  const Index P = 2;
  auto m = testing::linear_model(P, {1.0}, 0.5, -40.0);
  const auto h = history(2, 4, P, 2);
  const auto r = forecast::forecast(m, request(h, 6));
  for (Index k = 0; k < 2; ++k) {
    const Eigen::RowVectorXd last = h.x.row(k * 4 + 3);
    for (Index s = 0; s < 6; ++s) {
      CHECK((r.predictions.x.row(k * 6 + s) - last).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("forecast equals the analytic AR mean") {
  const Index P = 3;
  SUBCASE("order one") {
    const double g = 0.7, mu = -0.3;
    auto m = testing::linear_model(P, {g}, mu, 0.3);
    const auto h = history(4, 6, P, 3);
    const auto r = forecast::forecast(m, request(h, 10));
    for (Index k = 0; k < 4; ++k) {
      const Eigen::RowVectorXd last = h.x.row(k * 6 + 5);
      for (Index s = 1; s <= 10; ++s) {
        const Eigen::RowVectorXd expected = (mu + std::pow(g, static_cast<double>(s)) * (last.array() - mu)).matrix();
        CHECK((r.predictions.x.row(k * 10 + s - 1) - expected).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(r.predictions.times[static_cast<std::size_t>(k * 10 + s - 1)] == 6 + s);
      }
    }
  }
  SUBCASE("order two") {
    const double g1 = 0.5, g2 = 0.3, mu = 1.0;
    auto m = testing::linear_model(P, {g1, g2}, mu, 0.0);
    const auto h = history(2, 5, P, 4);
    const auto r = forecast::forecast(m, request(h, 8));
    for (Index k = 0; k < 2; ++k) {
      Eigen::RowVectorXd d1 = h.x.row(k * 5 + 4).array() - mu, d2 = h.x.row(k * 5 + 3).array() - mu;
      for (Index s = 0; s < 8; ++s) {
        const Eigen::RowVectorXd d = g1 * d1 + g2 * d2;
        CHECK((r.predictions.x.row(k * 8 + s).array() - mu - d.array()).abs().maxCoeff() < 1e-10);
        d2 = d1;
        d1 = d;
      }
    }
  }
}

TEST_CASE("future auxiliary rows only affect later steps") {
  auto m = model::model_init({2, 2, 1, 2}, 1.0, 5, {6}, {6});
  const auto h = history(3, 5, 2, 6);
  auto req = request(h, 6, 2);
  req.history_aux = gaussian(h.rows(), 2, 7);
  req.future_aux = gaussian(18, 2, 8);
  const auto base = forecast::forecast(m, req);
  for (Index k = 0; k < 3; ++k) req.future_aux.middleRows(k * 6 + 3, 3) = gaussian(3, 2, 9 + static_cast<std::uint64_t>(k));
  const auto changed = forecast::forecast(m, req);
  for (Index k = 0; k < 3; ++k) {
    CHECK(changed.predictions.x.middleRows(k * 6, 3) == base.predictions.x.middleRows(k * 6, 3));
    CHECK_FALSE(changed.predictions.x.middleRows(k * 6 + 3, 3) == base.predictions.x.middleRows(k * 6 + 3, 3));
  }
}

TEST_CASE("forecast determinism and sampled mode") {
  auto m = model::model_init({2, 2, 1, 1}, 1.0, 5, {6}, {6});
  const auto h = history(3, 5, 2, 6);
  auto req = request(h, 5);
  CHECK(forecast::forecast(m, req).predictions.x == forecast::forecast(m, req).predictions.x);
  const Matrix mean = forecast::forecast(m, req).predictions.x;
  req.mode = ForecastMode::Sampled;
  req.seed = 3;
  const Matrix s1 = forecast::forecast(m, req).predictions.x;
  CHECK(forecast::forecast(m, req).predictions.x == s1);
  CHECK_FALSE(s1 == mean);
  req.seed = 4;
  CHECK_FALSE(forecast::forecast(m, req).predictions.x == s1);
}

TEST_CASE("forecast request validation") {
  auto m = testing::linear_model(2, {0.5, 0.2}, 0.0, 0.0);
  const auto h = history(2, 5, 2, 1);
  auto req = request(h, 3);
  req.horizon = 0;
  CHECK_THROWS_AS(forecast::forecast(m, req), InvalidArgument);
  req = request(h, 3);
  req.future_aux = Matrix::Ones(5, 1);
  CHECK_THROWS_AS(forecast::forecast(m, req), ShapeError);
  req = request(history(2, 1, 2, 1), 3);
  CHECK_THROWS_AS(forecast::forecast(m, req), InvalidArgument);
  CHECK_THROWS_AS(make_request(m, h, 3), InvalidArgument);
}

TEST_CASE("make_request builds auxiliary rows from the stored spec") {
  auto spec = auxdata::AuxiliarySpec{};
  spec.spatial_levels = {2};
  spec.temporal_levels = {3};
  spec.time_min = 1;
  spec.time_max = 8;
  const auto h = history(2, 5, 2, 1);
  auto m = model::model_init({2, 2, 1, auxdata::auxiliary_width(spec)}, 1.0, 1, {4}, {4});
  m.aux_spec = spec;
  const auto req = make_request(m, h, 3);
  CHECK(req.history_aux == auxdata::build_auxiliary(spec, h.coords, h.times));
  CHECK(req.future_aux.rows() == 6);
  const auto r = forecast::forecast(m, req);
  CHECK(r.predictions.times == std::vector<std::int64_t>{6, 7, 8, 6, 7, 8});
}

TEST_CASE("persistence baseline") {
  const auto h = history(3, 4, 2, 10);
  const auto one = persistence_baseline(h, 1);
  CHECK(one.rows() == 3);
  for (Index k = 0; k < 3; ++k) CHECK(one.x.row(k) == h.x.row(k * 4 + 3));

  auto flat = h;
  flat.x.setConstant(2.5);
  const auto p = persistence_baseline(data::head_until(flat, 2), 2);
  const auto flat_truth = align_truth(p, flat);
  REQUIRE(flat_truth.has_value());
  CHECK(eval::per_variable_mse(*flat_truth, p.x).maxCoeff() == 0.0);
  CHECK_THROWS_AS(persistence_baseline(h, 0), InvalidArgument);

  // White noise: truth and forecast are independent draws, MSE ≈ 2σ².
  const double sigma = 1.5;
  const auto noise = history(2000, 2, 2, 11);
  auto scaled = noise;
  scaled.x *= sigma;
  const auto first = data::head_until(scaled, 1);
  const auto pred = persistence_baseline(first, 1);
  const auto truth = align_truth(pred, scaled);
  REQUIRE(truth.has_value());
  const auto err = eval::per_variable_mse(*truth, pred.x);
  for (Index j = 0; j < 2; ++j) CHECK(err(j) == doctest::Approx(2.0 * sigma * sigma).epsilon(0.08));
}

TEST_CASE("align_truth") {
  const auto h = history(2, 6, 2, 12);
  const auto pred = persistence_baseline(data::head_until(h, 4), 2);
  const auto t = align_truth(pred, h);
  REQUIRE(t.has_value());
  CHECK(t->row(0) == h.x.row(4));
  CHECK(t->row(3) == h.x.row(11));
  CHECK_FALSE(align_truth(persistence_baseline(h, 1), h).has_value());
}
