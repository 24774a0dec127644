#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ivaear::data {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

/// One row per (location, time) observation.
struct SpatioTemporalDataset {
  Matrix coords;                    // n × 2
  std::vector<std::int64_t> times;  // n, 1-based
  Matrix x;                         // n × S
  std::optional<Matrix> z;          // n × P, when ground truth is known

  Index rows() const { return x.rows(); }
  Index observed_dim() const { return x.cols(); }
  Index latent_dim() const { return z ? z->cols() : 0; }
  std::int64_t max_time() const;
  std::int64_t min_time() const;

  void validate() const;
};

/// Locations in order of first appearance and each row's location.
struct LocationIndex {
  Matrix sites;                                // n_locations × 2
  std::vector<Index> location_of_row;
  std::vector<std::vector<Index>> rows_by_location;  // each sorted by time

  Index size() const { return sites.rows(); }
};

LocationIndex index_locations(const SpatioTemporalDataset& data);

/// lags(i, r−1) is the row holding the same location at time t_i − r, or −1
/// when that observation is absent.
IndexMatrix lag_table(const SpatioTemporalDataset& data, const LocationIndex& index, Index W);

/// Rows with every lag 1..W present.
std::vector<Index> eligible_rows(const IndexMatrix& lags);

SpatioTemporalDataset select_rows(const SpatioTemporalDataset& data, std::span<const Index> rows);

/// Rows with time <= t_max / time > t_max.
SpatioTemporalDataset head_until(const SpatioTemporalDataset& data, std::int64_t t_max);
SpatioTemporalDataset tail_after(const SpatioTemporalDataset& data, std::int64_t t_max);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

/// Header `s1,s2,t,x1..xS[,z1..zP]`.
void write_csv(std::ostream& os, const SpatioTemporalDataset& data);
void write_csv(const std::string& path, const SpatioTemporalDataset& data);

/// Rejects ragged rows, non-numeric, NaN and infinite cells with
/// line-numbered errors.
SpatioTemporalDataset read_csv(std::istream& is, const std::string& source = "<stream>");
SpatioTemporalDataset read_csv(const std::string& path);

}  // namespace ivaear::data
