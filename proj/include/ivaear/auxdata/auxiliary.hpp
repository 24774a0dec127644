#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ivaear::auxdata {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class AuxKind { Rbf, Segmentation, SeasonalRbf };

std::string_view to_string(AuxKind k);
AuxKind aux_kind_from_string(std::string_view s);

struct AuxiliarySpec {
  AuxKind kind = AuxKind::Rbf;
  std::vector<Index> spatial_levels{2, 9};       // H
  std::vector<Index> temporal_levels{9, 17, 37};  // G
  Index spatial_grid = 10;
  Index temporal_segment_len = 5;
  Index period = 365;
  std::vector<std::int64_t> year_breaks;  // first time index of each year
  // Temporal domain for node placement / segment counting. 0 = take it from
  // the data the auxiliary matrix is first built for.
  std::int64_t time_min = 0;
  std::int64_t time_max = 0;

  void validate() const;
  bool operator==(const AuxiliarySpec&) const = default;
};

/// Spatial levels h: h×h node grid over [0,1]² with Gaussian width 1/h.
/// Temporal levels g: g equally spaced nodes over [time_min, time_max] with
/// width equal to the node spacing. Columns: spatial levels, then temporal.
Matrix build_rbf(const Matrix& coords, std::span<const double> times,
                 std::span<const Index> spatial_levels, std::span<const Index> temporal_levels,
                 double time_min, double time_max);

Index rbf_column_count(std::span<const Index> spatial_levels,
                       std::span<const Index> temporal_levels);

struct Segmentation {
  Matrix onehot;
  Index clamped = 0;  // locations outside [0,1]² moved to the boundary segment
};

/// grid² spatial one-hot columns then ⌈n_t/seg_len⌉ temporal one-hot columns.
Segmentation build_segmentation(const Matrix& coords, std::span<const std::int64_t> times,
                                Index grid, Index seg_len, std::int64_t time_min,
                                std::int64_t time_max);

/// ((t − 1) mod period) + 1.
std::int64_t seasonal_time(std::int64_t t, Index period);

/// Spatial RBFs, temporal RBFs over the seasonal time t_s ∈ [1, period], then
/// one one-hot column per year break.
Matrix build_seasonal(const Matrix& coords, std::span<const std::int64_t> times, Index period,
                      std::span<const std::int64_t> year_breaks,
                      std::span<const Index> spatial_levels,
                      std::span<const Index> seasonal_levels);

/// Fills time_min / time_max from the given times when unset.
AuxiliarySpec resolve_time_range(AuxiliarySpec spec, std::span<const std::int64_t> times);

/// Builds the auxiliary matrix for the spec's kind. The spec's time range
/// must already be resolved.
Matrix build_auxiliary(const AuxiliarySpec& spec, const Matrix& coords,
                       std::span<const std::int64_t> times);

Index auxiliary_width(const AuxiliarySpec& spec);

/// Per-column affine standardization fitted on training data. Constant
/// columns keep scale 1.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& m);
  static Standardizer identity(Index cols);
  Matrix apply(const Matrix& m) const;
  Matrix invert(const Matrix& m) const;
  Index size() const { return mean.size(); }
  bool operator==(const Standardizer& o) const {
    return mean.size() == o.mean.size() && mean == o.mean && scale == o.scale;
  }
};

}  // namespace ivaear::auxdata
