#pragma once

#include "ivaear/data/dataset.hpp"
#include "ivaear/model/ivaear.hpp"

#include <cstdint>
#include <optional>

namespace ivaear::forecast {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class ForecastMode { Mean, Sampled };

/// Locations are taken in order of first appearance in `history`. Row
/// k·horizon + (h−1) of future_aux belongs to location k at step h.
struct ForecastRequest {
  data::SpatioTemporalDataset history;
  Matrix history_aux;  // one row per history row
  Matrix future_aux;   // horizon × n_locations rows
  Index horizon = 1;
  ForecastMode mode = ForecastMode::Mean;
  std::uint64_t seed = 0;
};

struct ForecastResult {
  data::SpatioTemporalDataset predictions;  // x decoded, times last + h, same row order
  Matrix latents;                           // latent path, same row order
};

ForecastResult forecast(const model::IVaeArModel& model, const ForecastRequest& req);

/// Builds history and future auxiliary rows from the model's stored
/// auxiliary spec.
ForecastRequest make_request(const model::IVaeArModel& model, const data::SpatioTemporalDataset& history,
                             Index horizon, ForecastMode mode = ForecastMode::Mean, std::uint64_t seed = 0);

/// Last observed x at each location repeated for every step; same row layout
/// as forecast().
data::SpatioTemporalDataset persistence_baseline(const data::SpatioTemporalDataset& history, Index horizon);

/// Truth x for every prediction row, matched on (s1, s2, t); empty when any
/// row is missing from `truth`.
std::optional<Matrix> align_truth(const data::SpatioTemporalDataset& predictions,
                                  const data::SpatioTemporalDataset& truth);

}  // namespace ivaear::forecast
