#pragma once

// Covariance models for the centred Gaussian processes studied here:
// Brownian motion, fractional, sub-fractional and bifractional Brownian
// motion, plus user-supplied Gram matrices on a fixed grid.

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qvar/detail/csv.hpp"
#include "qvar/error.hpp"

namespace qvar {

enum class KernelFamily { BrownianMotion, FractionalBM, SubFractionalBM, BiFractionalBM, Tabulated };

inline std::string_view to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::BrownianMotion: return "bm";
    case KernelFamily::FractionalBM: return "fbm";
    case KernelFamily::SubFractionalBM: return "subfbm";
    case KernelFamily::BiFractionalBM: return "bifbm";
    case KernelFamily::Tabulated: return "table";
  }
  return "unknown";
}

/// Gram matrix known only on a finite grid of times.
struct KernelTable {
  std::vector<double> times;
  Eigen::MatrixXd gram;
};

/// A named covariance model R(s,t) on [0, T]. Immutable once built.
class KernelSpec {
 public:
  static KernelSpec brownian(double horizon = 1.0) {
    return KernelSpec(KernelFamily::BrownianMotion, 0.5, 1.0, horizon);
  }

  static KernelSpec fbm(double hurst, double horizon = 1.0) {
    check_hurst(hurst);
    return KernelSpec(KernelFamily::FractionalBM, hurst, 1.0, horizon);
  }

  static KernelSpec sub_fbm(double hurst, double horizon = 1.0) {
    check_hurst(hurst);
    return KernelSpec(KernelFamily::SubFractionalBM, hurst, 1.0, horizon);
  }

  static KernelSpec bifbm(double hurst, double k, double horizon = 1.0) {
    check_hurst(hurst);
    if (!(k > 0.0 && k < 2.0)) throw config_error("bifractional K must lie in (0,2), got " + detail::format_double(k));
    const double hk = hurst * k;
    if (!(hk > 0.0 && hk < 1.0)) throw config_error("bifractional H*K must lie in (0,1), got " + detail::format_double(hk));
    return KernelSpec(KernelFamily::BiFractionalBM, hurst, k, horizon);
  }

  /// Validates strict ordering, symmetry (1e-8 relative) and PSD (-1e-10·λmax).
  static KernelSpec tabulated(std::vector<double> times, Eigen::MatrixXd gram);

  /// CSV: first row = grid times, then one row per Gram matrix row.
  static KernelSpec load_csv(const std::string& path);

  KernelFamily family() const noexcept { return family_; }
  double hurst() const noexcept { return hurst_; }
  double bifractional_k() const noexcept { return k_; }
  double horizon() const noexcept { return horizon_; }
  const KernelTable* table() const noexcept { return table_.get(); }

  /// Self-similarity exponent of the variance, R(t,t) = c·t^{2·exponent}.
  double scaling_exponent() const noexcept { return family_ == KernelFamily::BiFractionalBM ? hurst_ * k_ : hurst_; }

  std::string describe() const;

 private:
  KernelSpec(KernelFamily f, double h, double k, double horizon) : family_(f), hurst_(h), k_(k), horizon_(horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw config_error("horizon T must be positive and finite");
  }

  static void check_hurst(double h) {
    if (!(h > 0.0 && h < 1.0)) throw config_error("Hurst index must lie in (0,1), got " + detail::format_double(h));
  }

  KernelFamily family_;
  double hurst_;
  double k_;
  double horizon_;
  std::shared_ptr<const KernelTable> table_;
};

namespace detail {

inline double time_tolerance(const KernelSpec& k) { return 1e-12 * std::max(1.0, k.horizon()); }

// Returns t clamped into the admissible interval, or throws if it lies outside
// by more than rounding.
inline double check_time(const KernelSpec& k, double t) {
  if (!std::isfinite(t)) throw domain_error("non-finite time");
  const double tol = time_tolerance(k);
  const double lo = k.table() ? k.table()->times.front() : 0.0;
  if (t < lo - tol || t > k.horizon() + tol) {
    throw domain_error("time " + format_double(t) + " outside [" + format_double(lo) + ", " +
                       format_double(k.horizon()) + "]");
  }
  return std::clamp(t, lo, k.horizon());
}

inline std::size_t table_index(const KernelTable& table, double t, double tol) {
  const auto& ts = table.times;
  auto it = std::lower_bound(ts.begin(), ts.end(), t - tol);
  if (it == ts.end() || std::abs(*it - t) > tol) {
    throw domain_error("time " + format_double(t) + " is not a grid point of the tabulated kernel");
  }
  return static_cast<std::size_t>(it - ts.begin());
}

inline double pow_abs(double x, double e) { return std::pow(std::abs(x), e); }

}  // namespace detail

/// R(s,t) in closed form for the built-in families; exact lookup for tables.
inline double covariance(const KernelSpec& k, double s, double t) {
  s = detail::check_time(k, s);
  t = detail::check_time(k, t);
  const double h2 = 2.0 * k.hurst();
  switch (k.family()) {
    case KernelFamily::BrownianMotion:
      return std::min(s, t);
    case KernelFamily::FractionalBM:
      return 0.5 * ((std::pow(s, h2) + std::pow(t, h2)) - detail::pow_abs(t - s, h2));
    case KernelFamily::SubFractionalBM:
      return std::pow(s, h2) + std::pow(t, h2) - 0.5 * (std::pow(s + t, h2) + detail::pow_abs(t - s, h2));
    case KernelFamily::BiFractionalBM: {
      const double kk = k.bifractional_k();
      return std::pow(2.0, -kk) * (std::pow(std::pow(s, h2) + std::pow(t, h2), kk) - detail::pow_abs(t - s, h2 * kk));
    }
    case KernelFamily::Tabulated: {
      const auto& tab = *k.table();
      const double tol = detail::time_tolerance(k);
      return tab.gram(static_cast<Eigen::Index>(detail::table_index(tab, s, tol)),
                      static_cast<Eigen::Index>(detail::table_index(tab, t, tol)));
    }
  }
  throw config_error("unknown kernel family");
}

/// d(s,t) = E(X_t - X_s)^2. The stationary part |t-s|^{2H} is evaluated from
/// the gap directly so nearby times do not cancel.
inline double incremental_variance(const KernelSpec& k, double s, double t) {
  s = detail::check_time(k, s);
  t = detail::check_time(k, t);
  if (s == t) return 0.0;
  const double h2 = 2.0 * k.hurst();
  const double gap = std::abs(t - s);
  switch (k.family()) {
    case KernelFamily::BrownianMotion:
      return gap;
    case KernelFamily::FractionalBM:
      return std::pow(gap, h2);
    case KernelFamily::SubFractionalBM:
      return std::pow(gap, h2) + std::pow(s + t, h2) - std::pow(2.0, h2 - 1.0) * (std::pow(s, h2) + std::pow(t, h2));
    case KernelFamily::BiFractionalBM: {
      const double kk = k.bifractional_k();
      const double scale = std::pow(2.0, 1.0 - kk);
      return std::pow(t, h2 * kk) + std::pow(s, h2 * kk) - scale * std::pow(std::pow(s, h2) + std::pow(t, h2), kk) +
             scale * std::pow(gap, h2 * kk);
    }
    case KernelFamily::Tabulated:
      return std::max(0.0, covariance(k, s, s) + covariance(k, t, t) - 2.0 * covariance(k, s, t));
  }
  throw config_error("unknown kernel family");
}

/// E[(Σ a_i X_{t_i})(Σ b_j X_{u_j})].
///
/// When both weight vectors sum to zero the bilinear form equals
/// -½ Σ a_i b_j d(t_i, u_j), which avoids subtracting O(1) covariances to
/// recover O(h^{2H}) increments on fine grids. Otherwise R is used directly.
inline double weighted_difference_cov(const KernelSpec& k, std::span<const double> times_a,
                                      std::span<const double> weights_a, std::span<const double> times_b,
                                      std::span<const double> weights_b) {
  if (times_a.size() != weights_a.size() || times_b.size() != weights_b.size()) {
    throw usage_error("weighted_difference_cov: times and weights must have equal lengths");
  }
  auto zero_sum = [](std::span<const double> w) {
    double sum = 0.0, mag = 0.0;
    for (double x : w) {
      sum += x;
      mag += std::abs(x);
    }
    return mag > 0.0 && std::abs(sum) <= 1e-13 * mag;
  };
  const bool use_increments = k.family() != KernelFamily::Tabulated && zero_sum(weights_a) && zero_sum(weights_b);
  double acc = 0.0;
  for (std::size_t i = 0; i < times_a.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < times_b.size(); ++j) {
      row += weights_b[j] * (use_increments ? -0.5 * incremental_variance(k, times_a[i], times_b[j])
                                            : covariance(k, times_a[i], times_b[j]));
    }
    acc += weights_a[i] * row;
  }
  return acc;
}

/// [R(t_i, t_j)] on an arbitrary list of times.
inline Eigen::MatrixXd gram_matrix(const KernelSpec& k, std::span<const double> times) {
  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      g(i, j) = g(j, i) = covariance(k, times[static_cast<std::size_t>(i)], times[static_cast<std::size_t>(j)]);
    }
  }
  return g;
}

inline KernelSpec KernelSpec::tabulated(std::vector<double> times, Eigen::MatrixXd gram) {
  const auto n = static_cast<Eigen::Index>(times.size());
  if (n == 0) throw data_error("tabulated kernel needs at least one grid time");
  if (gram.rows() != n || gram.cols() != n) throw data_error("tabulated kernel: Gram matrix must be square and match the grid");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) throw data_error("tabulated kernel: grid times must be finite and >= 0");
    if (i > 0 && !(times[i] > times[i - 1])) throw data_error("tabulated kernel: grid times must be strictly increasing");
  }
  if (!gram.allFinite()) throw data_error("tabulated kernel: non-finite Gram entry");
  const double scale = gram.cwiseAbs().maxCoeff();
  if ((gram - gram.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) throw data_error("tabulated kernel: Gram matrix is not symmetric");
  Eigen::MatrixXd sym = 0.5 * (gram + gram.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().minCoeff() < -1e-10 * lmax) throw data_error("tabulated kernel: Gram matrix is not positive semidefinite");

  const double horizon = times.back() > 0.0 ? times.back() : 1.0;
  KernelSpec spec(KernelFamily::Tabulated, 0.5, 1.0, horizon);
  spec.table_ = std::make_shared<const KernelTable>(KernelTable{std::move(times), std::move(sym)});
  return spec;
}

inline KernelSpec KernelSpec::load_csv(const std::string& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw data_error("tabulated kernel file '" + path + "' is empty");
  auto times = detail::parse_row(lines.front(), "grid time");
  const auto n = static_cast<Eigen::Index>(times.size());
  if (static_cast<Eigen::Index>(lines.size()) - 1 != n) throw data_error("tabulated kernel: expected " + std::to_string(n) + " Gram rows");
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = detail::parse_row(lines[static_cast<std::size_t>(i) + 1], "Gram entry");
    if (static_cast<Eigen::Index>(row.size()) != n) throw data_error("tabulated kernel: Gram row " + std::to_string(i + 1) + " has wrong length");
    for (Eigen::Index j = 0; j < n; ++j) gram(i, j) = row[static_cast<std::size_t>(j)];
  }
  return tabulated(std::move(times), std::move(gram));
}

inline std::string KernelSpec::describe() const {
  std::string out(to_string(family_));
  if (family_ == KernelFamily::FractionalBM || family_ == KernelFamily::SubFractionalBM) out += ":" + detail::format_double(hurst_);
  if (family_ == KernelFamily::BiFractionalBM) out += ":" + detail::format_double(hurst_) + ":" + detail::format_double(k_);
  out += "@T=" + detail::format_double(horizon_);
  return out;
}

/// Parses `bm`, `fbm:<H>`, `subfbm:<H>`, `bifbm:<H>:<K>` or `table:<path>`.
inline KernelSpec parse_kernel(std::string_view text, double horizon = 1.0) {
  const auto parts = detail::split(text, ':');
  const auto& name = parts.front();
  auto param = [&](std::size_t i) {
    if (parts.size() <= i) throw config_error("kernel '" + std::string(text) + "' is missing a parameter");
    double v = 0.0;
    if (!detail::try_parse_double(parts[i], v)) throw config_error("kernel '" + std::string(text) + "': bad number");
    return v;
  };
  auto arity = [&](std::size_t n) {
    if (parts.size() != n) throw config_error("kernel '" + std::string(text) + "' has the wrong number of fields");
  };
  if (name == "bm") {
    arity(1);
    return KernelSpec::brownian(horizon);
  }
  if (name == "fbm") {
    arity(2);
    return KernelSpec::fbm(param(1), horizon);
  }
  if (name == "subfbm") {
    arity(2);
    return KernelSpec::sub_fbm(param(1), horizon);
  }
  if (name == "bifbm") {
    arity(3);
    return KernelSpec::bifbm(param(1), param(2), horizon);
  }
  if (name == "table") {
    const auto path = text.substr(text.find(':') + 1);
    if (parts.size() < 2 || path.empty()) throw config_error("kernel 'table' needs a file path");
    return KernelSpec::load_csv(std::string(path));
  }
  throw config_error("unknown kernel '" + std::string(text) + "'");
}

}  // namespace qvar
