#include "ivaear/eval/metrics.hpp"

#include "ivaear/data/dataset.hpp"
#include "ivaear/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace ivaear::eval {

using data::format_double;

Matrix correlation_matrix(const Matrix& z_true, const Matrix& z_est) {
  if (z_true.rows() != z_est.rows()) throw ShapeError("correlation_matrix: row counts differ");
  if (z_true.rows() < 3) throw InvalidArgument("correlation_matrix: need at least 3 rows");
  const double n1 = static_cast<double>(z_true.rows() - 1);
  auto centered = [&](const Matrix& m, const char* name) {
    Matrix c = m.rowwise() - m.colwise().mean();
    Vector sd(m.cols());
    for (Index j = 0; j < m.cols(); ++j) {
      sd(j) = std::sqrt(c.col(j).squaredNorm() / n1);
      const double scale = std::max(1.0, m.col(j).cwiseAbs().maxCoeff());
      if (!(sd(j) > 1e-12 * scale)) {
        throw DegenerateColumn(std::string(name) + " column " + std::to_string(j + 1) + " is constant",
                               static_cast<long>(j));
      }
    }
    return std::make_pair(c, sd);
  };
  const auto [ct, st] = centered(z_true, "true latent");
  const auto [ce, se] = centered(z_est, "estimated latent");
  Matrix omega = (ct.transpose() * ce) / n1;
  for (Index i = 0; i < omega.rows(); ++i)
    for (Index j = 0; j < omega.cols(); ++j) omega(i, j) /= st(i) * se(j);
  return omega;
}

namespace {

void require_square(const Matrix& omega) {
  if (omega.rows() != omega.cols() || omega.rows() == 0) {
    throw InvalidArgument("mcc: correlation matrix must be square and non-empty, got " +
                          std::to_string(omega.rows()) + "x" + std::to_string(omega.cols()));
  }
}

double score(const Matrix& a, const std::vector<Index>& perm) {
  double s = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) s += a(static_cast<Index>(i), perm[i]);
  return s / static_cast<double>(perm.size());
}

}  // namespace

MccResult mcc(const Matrix& omega) {
  require_square(omega);
  const Matrix a = omega.cwiseAbs();
  const Index n = a.rows();
  // Shortest augmenting path Hungarian method, 1-based potentials; minimizes −|Ω|.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  MccResult r;
  r.permutation.assign(static_cast<std::size_t>(n), 0);
  for (Index j = 1; j <= n; ++j) r.permutation[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  r.value = score(a, r.permutation);
  return r;
}

MccResult mcc_bruteforce(const Matrix& omega) {
  require_square(omega);
  if (omega.rows() > 8) throw InvalidArgument("mcc_bruteforce: P must be <= 8");
  const Matrix a = omega.cwiseAbs();
  std::vector<Index> perm(static_cast<std::size_t>(a.rows()));
  std::iota(perm.begin(), perm.end(), Index{0});
  MccResult best{-1.0, perm};
  do {
    const double s = score(a, perm);
    if (s > best.value) best = {s, perm};
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double mse(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size()) throw ShapeError("mse: lengths differ");
  if (truth.empty()) throw InvalidArgument("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  return s / static_cast<double>(truth.size());
}

Vector per_variable_mse(const Matrix& truth, const Matrix& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) throw ShapeError("mse: shapes differ");
  if (truth.rows() == 0) throw InvalidArgument("mse: empty input");
  return (truth - pred).array().square().colwise().mean().transpose();
}

double wmse(const Matrix& truth, const Matrix& pred, const Vector& variances) {
  const Vector m = per_variable_mse(truth, pred);
  if (variances.size() != m.size()) throw ShapeError("wmse: one variance per variable required");
  double s = 0.0;
  for (Index i = 0; i < m.size(); ++i) {
    if (!(variances(i) > 0.0)) {
      throw InvalidArgument("wmse: variance of variable " + std::to_string(i + 1) + " is not positive");
    }
    s += m(i) / variances(i);
  }
  return s / static_cast<double>(m.size());
}

Deseasonalized deseasonalize(std::span<const double> x, std::span<const double> t, double period) {
  if (x.size() != t.size()) throw ShapeError("deseasonalize: series and times differ in length");
  if (x.size() < 3) throw InvalidArgument("deseasonalize: need at least 3 observations");
  if (!(period > 0.0)) throw InvalidArgument("deseasonalize: period must be positive");
  const auto n = static_cast<Index>(x.size());
  Matrix design(n, 3);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    const double w = 2.0 * std::numbers::pi * t[static_cast<std::size_t>(i)] / period;
    design(i, 0) = 1.0;
    design(i, 1) = std::cos(w);
    design(i, 2) = std::sin(w);
    y(i) = x[static_cast<std::size_t>(i)];
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) {
    throw DegenerateDesign("deseasonalize: seasonal design has rank " + std::to_string(qr.rank()) +
                           " < 3 (times do not vary enough within the period)");
  }
  Deseasonalized out;
  out.coefficients = qr.solve(y);
  out.residuals = y - design * out.coefficients;
  return out;
}

Vector deseasonalized_variances(const Matrix& x, std::span<const double> t, double period) {
  Vector var(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const Vector col = x.col(j);
    const auto r = deseasonalize(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), t, period);
    var(j) = (r.residuals.array() - r.residuals.mean()).square().mean();
  }
  return var;
}

namespace {

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_double(v[i]);
  return s;
}

}  // namespace

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "seed=" << seed << '\n';
  os << "mcc=" << format_double(mcc) << '\n';
  os << "permutation=";
  for (std::size_t i = 0; i < permutation.size(); ++i) os << (i ? " " : "") << permutation[i] + 1;
  os << '\n';
  for (Index i = 0; i < omega.rows(); ++i) {
    os << "omega." << i + 1 << '=';
    for (Index j = 0; j < omega.cols(); ++j) os << (j ? " " : "") << format_double(omega(i, j));
    os << '\n';
  }
  if (per_variable_mse.size() > 0) {
    os << "mse=" << join(std::vector<double>(per_variable_mse.data(), per_variable_mse.data() + per_variable_mse.size()))
       << '\n';
    os << "wmse=" << format_double(wmse) << '\n';
  }
  if (!elbo_trace.empty()) {
    os << "final_elbo=" << format_double(elbo_trace.back()) << '\n';
    os << "elbo_trace=" << join(elbo_trace) << '\n';
  }
  return os.str();
}

std::string EvalReport::csv_header() const {
  std::string h = "seed,mcc,permutation";
  if (per_variable_mse.size() > 0) h += ",wmse";
  if (!elbo_trace.empty()) h += ",final_elbo";
  return h;
}

std::string EvalReport::csv_row() const {
  std::ostringstream os;
  os << seed << ',' << format_double(mcc) << ',';
  for (std::size_t i = 0; i < permutation.size(); ++i) os << (i ? " " : "") << permutation[i] + 1;
  if (per_variable_mse.size() > 0) os << ',' << format_double(wmse);
  if (!elbo_trace.empty()) os << ',' << format_double(elbo_trace.back());
  return os.str();
}

}  // namespace ivaear::eval
