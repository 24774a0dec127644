#include "ivaear/auxdata/auxiliary.hpp"

#include "ivaear/error.hpp"

#include <algorithm>
#include <cmath>

namespace ivaear::auxdata {

std::string_view to_string(AuxKind k) {
  switch (k) {
    case AuxKind::Rbf: return "rbf";
    case AuxKind::Segmentation: return "segmentation";
    case AuxKind::SeasonalRbf: return "seasonal-rbf";
  }
  return "rbf";
}

AuxKind aux_kind_from_string(std::string_view s) {
  if (s == "rbf") return AuxKind::Rbf;
  if (s == "segmentation") return AuxKind::Segmentation;
  if (s == "seasonal-rbf") return AuxKind::SeasonalRbf;
  throw InvalidArgument("unknown auxiliary kind '" + std::string(s) +
                        "' (expected rbf, segmentation or seasonal-rbf)");
}

void AuxiliarySpec::validate() const {
  auto positive = [](const std::vector<Index>& v) {
    return std::all_of(v.begin(), v.end(), [](Index x) { return x >= 1; });
  };
  switch (kind) {
    case AuxKind::Rbf:
    case AuxKind::SeasonalRbf:
      if (spatial_levels.empty() || temporal_levels.empty()) {
        throw InvalidArgument("rbf auxiliary data needs non-empty spatial and temporal levels");
      }
      if (!positive(spatial_levels) || !positive(temporal_levels)) {
        throw InvalidArgument("resolution levels must be >= 1");
      }
      if (kind == AuxKind::SeasonalRbf) {
        if (period < 1) throw InvalidArgument("seasonal period must be >= 1");
        if (!std::is_sorted(year_breaks.begin(), year_breaks.end())) {
          throw InvalidArgument("year breaks must be ascending");
        }
      }
      break;
    case AuxKind::Segmentation:
      if (spatial_grid < 1 || temporal_segment_len < 1) {
        throw InvalidArgument("segmentation grid and segment length must be >= 1");
      }
      break;
  }
  if (time_max < time_min) throw InvalidArgument("time_max must not precede time_min");
}

Index rbf_column_count(std::span<const Index> spatial_levels,
                       std::span<const Index> temporal_levels) {
  Index n = 0;
  for (Index h : spatial_levels) n += h * h;
  for (Index g : temporal_levels) n += g;
  return n;
}

namespace {

std::vector<double> nodes_1d(Index count, double lo, double hi) {
  std::vector<double> nodes(static_cast<std::size_t>(count));
  if (count == 1) {
    nodes[0] = 0.5 * (lo + hi);
    return nodes;
  }
  for (Index k = 0; k < count; ++k) {
    nodes[static_cast<std::size_t>(k)] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  }
  return nodes;
}

double temporal_width(Index count, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return 1.0;
  return count == 1 ? span : span / static_cast<double>(count - 1);
}

void fill_spatial(Matrix& out, Index& col, const Matrix& coords,
                  std::span<const Index> spatial_levels) {
  for (Index h : spatial_levels) {
    const auto nodes = nodes_1d(h, 0.0, 1.0);
    const double w = 1.0 / static_cast<double>(h);
    const double denom = 2.0 * w * w;
    for (Index iy = 0; iy < h; ++iy) {
      for (Index ix = 0; ix < h; ++ix) {
        const double nx = nodes[static_cast<std::size_t>(ix)];
        const double ny = nodes[static_cast<std::size_t>(iy)];
        for (Index i = 0; i < coords.rows(); ++i) {
          const double dx = coords(i, 0) - nx, dy = coords(i, 1) - ny;
          out(i, col) = std::exp(-(dx * dx + dy * dy) / denom);
        }
        ++col;
      }
    }
  }
}

void fill_temporal(Matrix& out, Index& col, std::span<const double> times,
                   std::span<const Index> temporal_levels, double lo, double hi) {
  for (Index g : temporal_levels) {
    const auto nodes = nodes_1d(g, lo, hi);
    const double w = temporal_width(g, lo, hi);
    const double denom = 2.0 * w * w;
    for (double node : nodes) {
      for (std::size_t i = 0; i < times.size(); ++i) {
        const double d = times[i] - node;
        out(static_cast<Index>(i), col) = std::exp(-(d * d) / denom);
      }
      ++col;
    }
  }
}

}  // namespace

Matrix build_rbf(const Matrix& coords, std::span<const double> times,
                 std::span<const Index> spatial_levels, std::span<const Index> temporal_levels,
                 double time_min, double time_max) {
  if (spatial_levels.empty() || temporal_levels.empty()) {
    throw InvalidArgument("build_rbf: spatial and temporal levels must be non-empty");
  }
  for (Index l : spatial_levels)
    if (l < 1) throw InvalidArgument("build_rbf: levels must be >= 1");
  for (Index l : temporal_levels)
    if (l < 1) throw InvalidArgument("build_rbf: levels must be >= 1");
  if (static_cast<Index>(times.size()) != coords.rows()) {
    throw ShapeError("build_rbf: coordinate and time counts differ");
  }
  Matrix out(coords.rows(), rbf_column_count(spatial_levels, temporal_levels));
  Index col = 0;
  fill_spatial(out, col, coords, spatial_levels);
  fill_temporal(out, col, times, temporal_levels, time_min, time_max);
  return out;
}

Segmentation build_segmentation(const Matrix& coords, std::span<const std::int64_t> times,
                                Index grid, Index seg_len, std::int64_t time_min,
                                std::int64_t time_max) {
  if (grid < 1 || seg_len < 1) {
    throw InvalidArgument("build_segmentation: grid and segment length must be >= 1");
  }
  if (static_cast<Index>(times.size()) != coords.rows()) {
    throw ShapeError("build_segmentation: coordinate and time counts differ");
  }
  const Index n_t = time_max - time_min + 1;
  const Index t_cols = (n_t + seg_len - 1) / seg_len;
  Segmentation seg;
  seg.onehot = Matrix::Zero(coords.rows(), grid * grid + t_cols);
  for (Index i = 0; i < coords.rows(); ++i) {
    Index cell[2];
    for (int a = 0; a < 2; ++a) {
      const double v = coords(i, a);
      if (v < 0.0 || v > 1.0) ++seg.clamped;
      const auto k = static_cast<Index>(std::floor(std::clamp(v, 0.0, 1.0) * static_cast<double>(grid)));
      cell[a] = std::min(k, grid - 1);
    }
    seg.onehot(i, cell[0] + grid * cell[1]) = 1.0;
    const Index tk = std::clamp<Index>((times[static_cast<std::size_t>(i)] - time_min) / seg_len, 0, t_cols - 1);
    seg.onehot(i, grid * grid + tk) = 1.0;
  }
  return seg;
}

std::int64_t seasonal_time(std::int64_t t, Index period) {
  if (t <= 0) throw InvalidArgument("seasonal_time: time must be positive");
  if (period < 1) throw InvalidArgument("seasonal_time: period must be >= 1");
  return ((t - 1) % period) + 1;
}

Matrix build_seasonal(const Matrix& coords, std::span<const std::int64_t> times, Index period,
                      std::span<const std::int64_t> year_breaks,
                      std::span<const Index> spatial_levels,
                      std::span<const Index> seasonal_levels) {
  if (period < 1) throw InvalidArgument("build_seasonal: period must be >= 1");
  if (static_cast<Index>(times.size()) != coords.rows()) {
    throw ShapeError("build_seasonal: coordinate and time counts differ");
  }
  std::vector<double> ts(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    ts[i] = static_cast<double>(seasonal_time(times[i], period));
  }
  const Matrix rbf = build_rbf(coords, ts, spatial_levels, seasonal_levels, 1.0,
                               static_cast<double>(period));
  const auto years = static_cast<Index>(year_breaks.size());
  Matrix out = Matrix::Zero(coords.rows(), rbf.cols() + years);
  out.leftCols(rbf.cols()) = rbf;
  if (years > 0) {
    for (Index i = 0; i < coords.rows(); ++i) {
      const std::int64_t t = times[static_cast<std::size_t>(i)];
      Index year = 0;
      for (Index k = 1; k < years; ++k) {
        if (t >= year_breaks[static_cast<std::size_t>(k)]) year = k;
      }
      out(i, rbf.cols() + year) = 1.0;
    }
  }
  return out;
}

AuxiliarySpec resolve_time_range(AuxiliarySpec spec, std::span<const std::int64_t> times) {
  if (spec.time_min == 0 && spec.time_max == 0 && !times.empty()) {
    spec.time_min = *std::min_element(times.begin(), times.end());
    spec.time_max = *std::max_element(times.begin(), times.end());
  }
  return spec;
}

Matrix build_auxiliary(const AuxiliarySpec& spec, const Matrix& coords,
                       std::span<const std::int64_t> times) {
  spec.validate();
  switch (spec.kind) {
    case AuxKind::Rbf: {
      std::vector<double> ts(times.begin(), times.end());
      return build_rbf(coords, ts, spec.spatial_levels, spec.temporal_levels,
                       static_cast<double>(spec.time_min), static_cast<double>(spec.time_max));
    }
    case AuxKind::Segmentation:
      return build_segmentation(coords, times, spec.spatial_grid, spec.temporal_segment_len,
                                spec.time_min, spec.time_max)
          .onehot;
    case AuxKind::SeasonalRbf:
      return build_seasonal(coords, times, spec.period, spec.year_breaks, spec.spatial_levels,
                            spec.temporal_levels);
  }
  throw InvalidArgument("unknown auxiliary kind");
}

Index auxiliary_width(const AuxiliarySpec& spec) {
  switch (spec.kind) {
    case AuxKind::Rbf: return rbf_column_count(spec.spatial_levels, spec.temporal_levels);
    case AuxKind::Segmentation: {
      const Index n_t = spec.time_max - spec.time_min + 1;
      return spec.spatial_grid * spec.spatial_grid +
             (n_t + spec.temporal_segment_len - 1) / spec.temporal_segment_len;
    }
    case AuxKind::SeasonalRbf:
      return rbf_column_count(spec.spatial_levels, spec.temporal_levels) +
             static_cast<Index>(spec.year_breaks.size());
  }
  return 0;
}

Standardizer Standardizer::fit(const Matrix& m) {
  Standardizer s;
  const double n = static_cast<double>(std::max<Index>(m.rows(), 1));
  s.mean = m.colwise().sum().transpose() / n;
  s.scale.resize(m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    const double var = (m.col(j).array() - s.mean(j)).square().sum() / n;
    s.scale(j) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(Index cols) {
  return Standardizer{Vector::Zero(cols), Vector::Ones(cols)};
}

Matrix Standardizer::apply(const Matrix& m) const {
  if (m.cols() != mean.size()) throw ShapeError("Standardizer: column count mismatch");
  Matrix out = m;
  out.rowwise() -= mean.transpose();
  out.array().rowwise() /= scale.transpose().array();
  return out;
}

Matrix Standardizer::invert(const Matrix& m) const {
  if (m.cols() != mean.size()) throw ShapeError("Standardizer: column count mismatch");
  Matrix out = m;
  out.array().rowwise() *= scale.transpose().array();
  out.rowwise() += mean.transpose();
  return out;
}

}  // namespace ivaear::auxdata
