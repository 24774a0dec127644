#include "ivaear/data/dataset.hpp"

#include "ivaear/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace ivaear::data {

std::int64_t SpatioTemporalDataset::max_time() const {
  if (times.empty()) throw InvalidArgument("dataset is empty");
  return *std::max_element(times.begin(), times.end());
}

std::int64_t SpatioTemporalDataset::min_time() const {
  if (times.empty()) throw InvalidArgument("dataset is empty");
  return *std::min_element(times.begin(), times.end());
}

void SpatioTemporalDataset::validate() const {
  const Index n = x.rows();
  if (coords.rows() != n || coords.cols() != 2 || static_cast<Index>(times.size()) != n) {
    throw ShapeError("dataset columns disagree in row count");
  }
  if (z && z->rows() != n) throw ShapeError("latent matrix row count differs from observations");
}

LocationIndex index_locations(const SpatioTemporalDataset& data) {
  LocationIndex idx;
  std::map<std::pair<double, double>, Index> seen;
  std::vector<std::pair<double, double>> order;
  idx.location_of_row.resize(static_cast<std::size_t>(data.rows()));
  for (Index i = 0; i < data.rows(); ++i) {
    const auto key = std::make_pair(data.coords(i, 0), data.coords(i, 1));
    auto [it, inserted] = seen.emplace(key, static_cast<Index>(order.size()));
    if (inserted) {
      order.push_back(key);
      idx.rows_by_location.emplace_back();
    }
    idx.location_of_row[static_cast<std::size_t>(i)] = it->second;
    idx.rows_by_location[static_cast<std::size_t>(it->second)].push_back(i);
  }
  idx.sites.resize(static_cast<Index>(order.size()), 2);
  for (std::size_t k = 0; k < order.size(); ++k) {
    idx.sites(static_cast<Index>(k), 0) = order[k].first;
    idx.sites(static_cast<Index>(k), 1) = order[k].second;
  }
  for (auto& rows : idx.rows_by_location) {
    std::stable_sort(rows.begin(), rows.end(), [&data](Index a, Index b) {
      return data.times[static_cast<std::size_t>(a)] < data.times[static_cast<std::size_t>(b)];
    });
  }
  return idx;
}

IndexMatrix lag_table(const SpatioTemporalDataset& data, const LocationIndex& index, Index W) {
  IndexMatrix lags = IndexMatrix::Constant(data.rows(), W, -1);
  if (W == 0) return lags;
  for (const auto& rows : index.rows_by_location) {
    std::map<std::int64_t, Index> by_time;
    for (Index r : rows) by_time[data.times[static_cast<std::size_t>(r)]] = r;
    for (Index r : rows) {
      const std::int64_t t = data.times[static_cast<std::size_t>(r)];
      for (Index k = 1; k <= W; ++k) {
        auto it = by_time.find(t - k);
        if (it != by_time.end()) lags(r, k - 1) = it->second;
      }
    }
  }
  return lags;
}

std::vector<Index> eligible_rows(const IndexMatrix& lags) {
  std::vector<Index> out;
  for (Index i = 0; i < lags.rows(); ++i) {
    bool ok = true;
    for (Index k = 0; k < lags.cols(); ++k) ok = ok && lags(i, k) >= 0;
    if (ok) out.push_back(i);
  }
  return out;
}

SpatioTemporalDataset select_rows(const SpatioTemporalDataset& data, std::span<const Index> rows) {
  SpatioTemporalDataset out;
  const auto n = static_cast<Index>(rows.size());
  out.coords.resize(n, 2);
  out.x.resize(n, data.x.cols());
  if (data.z) out.z = Matrix(n, data.z->cols());
  out.times.resize(rows.size());
  for (Index k = 0; k < n; ++k) {
    const Index r = rows[static_cast<std::size_t>(k)];
    out.coords.row(k) = data.coords.row(r);
    out.x.row(k) = data.x.row(r);
    if (data.z) out.z->row(k) = data.z->row(r);
    out.times[static_cast<std::size_t>(k)] = data.times[static_cast<std::size_t>(r)];
  }
  return out;
}

namespace {

template <class Pred>
SpatioTemporalDataset filter(const SpatioTemporalDataset& data, Pred keep) {
  std::vector<Index> rows;
  for (Index i = 0; i < data.rows(); ++i) {
    if (keep(data.times[static_cast<std::size_t>(i)])) rows.push_back(i);
  }
  return select_rows(data, rows);
}

}  // namespace

SpatioTemporalDataset head_until(const SpatioTemporalDataset& data, std::int64_t t_max) {
  return filter(data, [t_max](std::int64_t t) { return t <= t_max; });
}

SpatioTemporalDataset tail_after(const SpatioTemporalDataset& data, std::int64_t t_max) {
  return filter(data, [t_max](std::int64_t t) { return t > t_max; });
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& os, const SpatioTemporalDataset& data) {
  data.validate();
  os << "s1,s2,t";
  for (Index j = 0; j < data.x.cols(); ++j) os << ",x" << (j + 1);
  if (data.z) {
    for (Index j = 0; j < data.z->cols(); ++j) os << ",z" << (j + 1);
  }
  os << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    os << format_double(data.coords(i, 0)) << ',' << format_double(data.coords(i, 1)) << ','
       << data.times[static_cast<std::size_t>(i)];
    for (Index j = 0; j < data.x.cols(); ++j) os << ',' << format_double(data.x(i, j));
    if (data.z) {
      for (Index j = 0; j < data.z->cols(); ++j) os << ',' << format_double((*data.z)(i, j));
    }
    os << '\n';
  }
}

void write_csv(const std::string& path, const SpatioTemporalDataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_csv(os, data);
  if (!os) throw IoError("failed writing '" + path + "'");
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, const std::string& source, std::size_t line,
                  std::size_t col) {
  const std::string cell = trim(raw);
  double v = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw InvalidArgument(source + ":" + std::to_string(line) + ": column " +
                          std::to_string(col + 1) + " is not a number: '" + cell + "'");
  }
  if (!std::isfinite(v)) {
    throw InvalidArgument(source + ":" + std::to_string(line) + ": column " +
                          std::to_string(col + 1) + " is not finite");
  }
  return v;
}

}  // namespace

SpatioTemporalDataset read_csv(std::istream& is, const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument(source + ": empty file");
  const auto header = split(trim(line));
  if (header.size() < 4 || trim(header[0]) != "s1" || trim(header[1]) != "s2" ||
      trim(header[2]) != "t") {
    throw InvalidArgument(source + ":1: header must start with s1,s2,t followed by x columns");
  }
  Index S = 0, P = 0;
  for (std::size_t c = 3; c < header.size(); ++c) {
    const std::string h = trim(header[c]);
    const bool is_x = h == "x" + std::to_string(S + 1);
    const bool is_z = h == "z" + std::to_string(P + 1);
    if (is_x && P == 0) {
      ++S;
    } else if (is_z && S > 0) {
      ++P;
    } else {
      throw InvalidArgument(source + ":1: unexpected header column '" + h + "'");
    }
  }
  if (S == 0) throw InvalidArgument(source + ":1: no x columns");

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw InvalidArgument(source + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " cells, found " +
                            std::to_string(cells.size()));
    }
    std::vector<double> vals(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) vals[c] = parse_cell(cells[c], source, lineno, c);
    if (vals[2] != std::floor(vals[2])) {
      throw InvalidArgument(source + ":" + std::to_string(lineno) + ": time must be an integer");
    }
    rows.push_back(std::move(vals));
  }

  SpatioTemporalDataset d;
  const auto n = static_cast<Index>(rows.size());
  d.coords.resize(n, 2);
  d.x.resize(n, S);
  if (P > 0) d.z = Matrix(n, P);
  d.times.resize(rows.size());
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    d.coords(i, 0) = r[0];
    d.coords(i, 1) = r[1];
    d.times[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(r[2]);
    for (Index j = 0; j < S; ++j) d.x(i, j) = r[static_cast<std::size_t>(3 + j)];
    for (Index j = 0; j < P; ++j) (*d.z)(i, j) = r[static_cast<std::size_t>(3 + S + j)];
  }
  return d;
}

SpatioTemporalDataset read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_csv(is, path);
}

}  // namespace ivaear::data
