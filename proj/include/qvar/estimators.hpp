#pragma once

// Realized statistics on observed paths and a dyadic log-log scale-exponent
// (Hurst) estimator.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "json.hpp"
#include "qvar/detail/csv.hpp"
#include "qvar/detail/fit.hpp"
#include "qvar/error.hpp"
#include "qvar/schemes.hpp"

namespace qvar {

/// One observed path. Times strictly increasing.
struct PathSample {
  std::vector<double> times;
  std::vector<double> values;

  PathSample() = default;
  PathSample(std::vector<double> t, std::vector<double> v) : times(std::move(t)), values(std::move(v)) {
    if (times.size() != values.size()) throw data_error("path: times and values differ in length");
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!std::isfinite(times[i]) || !std::isfinite(values[i])) throw data_error("path: non-finite entry at row " + std::to_string(i + 1));
      if (i > 0 && !(times[i] > times[i - 1])) throw data_error("path: times not strictly increasing at row " + std::to_string(i + 1));
    }
  }
};

/// CSV with header `time,value`. Row numbers in errors count data rows from 1.
inline PathSample load_path_csv(const std::string& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw data_error("path file '" + path + "' is empty");
  const auto header = detail::split(lines.front(), ',');
  if (header.size() != 2 || header[0] != "time" || header[1] != "value") {
    throw data_error("path file '" + path + "' must start with the header 'time,value'");
  }
  std::vector<double> t, v;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = detail::split(lines[i], ',');
    if (f.size() != 2) throw data_error("path file: row " + std::to_string(i) + " must have two columns");
    t.push_back(detail::parse_double(f[0], "time (row " + std::to_string(i) + ")"));
    v.push_back(detail::parse_double(f[1], "value (row " + std::to_string(i) + ")"));
  }
  return PathSample(std::move(t), std::move(v));
}

inline std::string path_csv(const PathSample& p) {
  std::string out = "time,value\n";
  for (std::size_t i = 0; i < p.times.size(); ++i) {
    out += detail::format_double(p.times[i]) + "," + detail::format_double(p.values[i]) + "\n";
  }
  return out;
}

struct EstimateReport {
  std::vector<std::size_t> levels;
  std::vector<double> statistics;  // Σ(stencil)² per level
  double slope = 0.0;              // d log(statistic) / d log n
  double hurst = 0.0;
  double residual = 0.0;           // RMS of the log-log fit
};

namespace detail {

inline double path_value(const PathSample& path, double t) {
  const double tol = 1e-12 * std::max(1.0, std::abs(path.times.back()));
  auto it = std::lower_bound(path.times.begin(), path.times.end(), t - tol);
  if (it == path.times.end() || std::abs(*it - t) > tol) {
    throw data_error("partition point " + format_double(t) + " is not sampled in the path");
  }
  return path.values[static_cast<std::size_t>(it - path.times.begin())];
}

// Rows are zero-sum, so values are taken relative to the first node; this
// keeps constant paths at exactly 0 and avoids cancellation on large levels.
inline double apply_row(const PathSample& path, const WeightRow& row) {
  const double base = path_value(path, row.times.front());
  double y = 0.0;
  for (std::size_t i = 1; i < row.times.size(); ++i) y += row.weights[i] * (path_value(path, row.times[i]) - base);
  return y;
}

}  // namespace detail

/// Σ_k |Y_k|^α with Y built from observed values via the scheme's weight rows.
/// The kernel is needed only by schemes normalized by E(ΔX)².
inline double realized_stat(const PathSample& path, const DifferenceScheme& scheme, const Partition& p, double alpha,
                            const KernelSpec* kernel_for_normalization = nullptr) {
  if (!(alpha >= 1.0) || !std::isfinite(alpha)) throw usage_error("realized_stat: alpha must be >= 1");
  if (path.times.empty()) throw data_error("realized_stat: empty path");
  const auto rows = weight_rows(scheme, p, kernel_for_normalization);
  double acc = 0.0;
  for (const auto& row : rows) {
    const double y = std::abs(detail::apply_row(path, row));
    acc += alpha == 2.0 ? y * y : std::pow(y, alpha);
  }
  return acc;
}

/// Degree of homogeneity in the mesh of a scheme's unnormalized stencil
/// weights: the second-order stencil carries one factor of Δt.
inline int stencil_degree(const DifferenceScheme& scheme) {
  return std::holds_alternative<SecondOrderBegyn>(scheme) ? 1 : 0;
}

/// Fits log S_n = c + s·log n; for S_n ∝ n^{1 − 2H − 2·degree} this gives
/// H = (1 − s)/2 − degree.
inline EstimateReport fit_hurst(std::vector<std::size_t> levels, std::vector<double> statistics, int degree = 0) {
  if (levels.size() != statistics.size()) throw usage_error("fit_hurst: levels and statistics differ in length");
  if (levels.size() < 2) throw usage_error("hurst estimation needs at least 2 levels");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(statistics[i] > 0.0)) throw degenerate_error("hurst estimation: non-positive statistic at level " + std::to_string(levels[i]));
    x.push_back(std::log(static_cast<double>(levels[i])));
    y.push_back(std::log(statistics[i]));
  }
  const auto fit = detail::least_squares(x, y);
  EstimateReport r;
  r.levels = std::move(levels);
  r.statistics = std::move(statistics);
  r.slope = fit.slope;
  r.hurst = (1.0 - fit.slope) / 2.0 - degree;
  r.residual = fit.residual_rms;
  return r;
}

/// Dyadic-style log-log regression of Σ(stencil)² over uniform sub-grids of
/// the path. φ and normalizations are ignored; only the stencil shape matters.
inline EstimateReport hurst_estimate(const PathSample& path, const std::vector<std::size_t>& levels,
                                     const DifferenceScheme& scheme) {
  if (levels.size() < 2) throw usage_error("hurst estimation needs at least 2 levels");
  if (path.times.empty() || path.times.front() != 0.0) throw data_error("hurst estimation: path must start at time 0");
  const double horizon = path.times.back();
  DifferenceScheme shape = scheme;
  if (auto* ga = std::get_if<GeneralA>(&shape)) ga->step = 0.0;
  std::vector<double> stats;
  for (std::size_t n : levels) {
    if (n + 1 > path.times.size()) {
      throw usage_error("path has " + std::to_string(path.times.size()) + " points; level " + std::to_string(n) + " needs " + std::to_string(n + 1));
    }
    const auto rows = stencil_rows(shape, make_uniform(n, horizon));
    double acc = 0.0;
    for (const auto& row : rows) {
      const double y = detail::apply_row(path, row);
      acc += y * y;
    }
    stats.push_back(acc);
  }
  return fit_hurst(levels, std::move(stats), stencil_degree(scheme));
}

/// C_H = E|N|^{1/H} by adaptive Gauss-Kronrod quadrature of 2∫₀^∞ x^p φ(x) dx.
inline double alpha_limit_constant(double hurst) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw usage_error("alpha_limit_constant: H must lie in (0,1)");
  const double p = 1.0 / hurst;
  auto integrand = [p](double x) { return std::pow(x, p) * std::exp(-0.5 * x * x); };
  double err = 0.0;
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, 0.0, std::numeric_limits<double>::infinity(), 20, 1e-14, &err);
  return 2.0 * integral / std::sqrt(2.0 * std::numbers::pi);
}

inline nlohmann::ordered_json to_json(const EstimateReport& r) {
  return nlohmann::ordered_json{{"levels", r.levels},
                                {"statistics", r.statistics},
                                {"slope", r.slope},
                                {"hurst", r.hurst},
                                {"residual", r.residual}};
}

}  // namespace qvar
