#pragma once

// Difference schemes: how the Gaussian vector Y^n is read off a process
// sampled on a partition, and the exact covariance matrix of that vector.

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qvar/detail/csv.hpp"
#include "qvar/error.hpp"
#include "qvar/kernels.hpp"
#include "qvar/partitions.hpp"

namespace qvar {

// ---------------------------------------------------------------------------
// Scaling function φ for first-order variations
// ---------------------------------------------------------------------------

struct PhiOne {};

/// φ(x) = x^γ.
struct PhiPower {
  double gamma;
};

/// Positive tabulated φ, interpolated linearly in log-log coordinates.
/// Queries outside [x_front, x_back] are a domain error.
struct PhiTable {
  std::vector<double> x;
  std::vector<double> phi;
};

using Phi = std::variant<PhiOne, PhiPower, PhiTable>;

inline PhiTable make_phi_table(std::vector<double> x, std::vector<double> phi) {
  if (x.size() != phi.size() || x.size() < 2) throw config_error("phi table needs at least two (x, phi) pairs");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(phi[i] > 0.0) || !std::isfinite(x[i]) || !std::isfinite(phi[i])) {
      throw config_error("phi table entries must be positive and finite");
    }
    if (i > 0 && !(x[i] > x[i - 1])) throw config_error("phi table abscissae must be strictly increasing");
  }
  return PhiTable{std::move(x), std::move(phi)};
}

/// Two-column CSV `x,phi`, optional header line.
inline PhiTable load_phi_table(const std::string& path) {
  auto lines = detail::read_lines(path);
  std::vector<double> x, phi;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto f = detail::split(lines[i], ',');
    double a = 0.0, b = 0.0;
    if (f.size() != 2 || !detail::try_parse_double(f[0], a) || !detail::try_parse_double(f[1], b)) {
      if (i == 0) continue;
      throw config_error("phi table '" + path + "': bad row " + std::to_string(i + 1));
    }
    x.push_back(a);
    phi.push_back(b);
  }
  return make_phi_table(std::move(x), std::move(phi));
}

inline double evaluate_phi(const Phi& phi, double x) {
  return std::visit(
      [x](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, PhiOne>) {
          return 1.0;
        } else if constexpr (std::is_same_v<F, PhiPower>) {
          return std::pow(x, f.gamma);
        } else {
          if (x < f.x.front() || x > f.x.back()) {
            throw domain_error("phi table queried at " + detail::format_double(x) + ", outside its range");
          }
          auto it = std::upper_bound(f.x.begin(), f.x.end(), x);
          const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - f.x.begin()), f.x.size() - 1);
          const std::size_t lo = hi - 1;
          const double w = (std::log(x) - std::log(f.x[lo])) / (std::log(f.x[hi]) - std::log(f.x[lo]));
          return std::exp((1.0 - w) * std::log(f.phi[lo]) + w * std::log(f.phi[hi]));
        }
      },
      phi);
}

// ---------------------------------------------------------------------------
// Schemes
// ---------------------------------------------------------------------------

/// Y_k = (X_{t_k} - X_{t_{k-1}}) / √φ(Δt_k), k = 1..N-1.
struct FirstOrder {
  Phi phi = PhiOne{};
};

/// Irregular-grid second differences
///   ΔX_k = Δt_{k+1} X_{t_{k-1}} + Δt_k X_{t_{k+1}} - (Δt_{k+1}+Δt_k) X_{t_k},
/// Y_k = √Δt_{k+1} · ΔX_k / √E(ΔX_k)², k = 1..N-2.
struct SecondOrderBegyn {};

/// Δ_a X_j = Σ_k a_k X_{(j+k)Δ}, Y_j = Δ_a X_j / √(n E(Δ_a X_j)²), j = 0..n-p,
/// where n is the number of steps of the partition. step <= 0 means Δ = T/n.
struct GeneralA {
  std::vector<double> a;
  double step = 0.0;
};

using DifferenceScheme = std::variant<FirstOrder, SecondOrderBegyn, GeneralA>;

inline GeneralA make_general_a(std::vector<double> a, double step = 0.0) {
  if (a.size() < 2) throw config_error("a-difference weights need at least two entries");
  double sum = 0.0, mag = 0.0;
  for (double w : a) {
    if (!std::isfinite(w)) throw config_error("a-difference weights must be finite");
    sum += w;
    mag += std::abs(w);
  }
  if (std::abs(sum) > 1e-14 * std::max(1.0, mag)) throw config_error("a-difference weights must sum to zero");
  if (!std::isfinite(step) || step < 0.0) throw config_error("a-difference step must be positive (or 0 for T/n)");
  return GeneralA{std::move(a), step};
}

inline FirstOrder first_order_power(double gamma) {
  if (!std::isfinite(gamma)) throw config_error("phi exponent must be finite");
  return FirstOrder{PhiPower{gamma}};
}

/// One entry of Y^n as a finite linear combination of process values.
struct WeightRow {
  std::vector<double> times;
  std::vector<double> weights;
};

namespace detail {

inline double row_variance(const KernelSpec& k, const WeightRow& r) {
  return weighted_difference_cov(k, r.times, r.weights, r.times, r.weights);
}

inline const KernelSpec& require_kernel(const KernelSpec* k, std::string_view scheme) {
  if (!k) throw usage_error(std::string(scheme) + " normalization needs a kernel");
  return *k;
}

inline std::vector<WeightRow> begyn_stencils(const Partition& p) {
  if (p.count() < 3) throw usage_error("second-order scheme needs at least 3 partition points");
  std::vector<WeightRow> rows;
  rows.reserve(p.count() - 2);
  for (std::size_t k = 1; k + 1 < p.count(); ++k) {
    const double dk = p.gap(k), dk1 = p.gap(k + 1);
    rows.push_back({{p[k - 1], p[k], p[k + 1]}, {dk1, -(dk1 + dk), dk}});
  }
  return rows;
}

inline std::vector<WeightRow> general_a_stencils(const GeneralA& s, const Partition& p) {
  const std::size_t order = s.a.size() - 1;
  const std::size_t n = p.steps();
  if (n < order + 1) throw usage_error("a-difference stencil of order " + std::to_string(order) + " needs at least " + std::to_string(order + 1) + " steps");
  const bool own_grid = !(s.step > 0.0);
  if (!own_grid && static_cast<double>(n) * s.step > p.horizon() * (1.0 + 1e-12)) {
    throw domain_error("a-difference grid nΔ exceeds the horizon T");
  }
  auto node = [&](std::size_t i) { return own_grid ? p[i] : static_cast<double>(i) * s.step; };
  std::vector<WeightRow> rows;
  rows.reserve(n - order + 1);
  for (std::size_t j = 0; j + order <= n; ++j) {
    WeightRow r;
    for (std::size_t k = 0; k <= order; ++k) {
      r.times.push_back(node(j + k));
      r.weights.push_back(s.a[k]);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace detail

/// Unnormalized stencils: increments for FirstOrder, ΔX_k for
/// SecondOrderBegyn, Δ_a X_j for GeneralA.
inline std::vector<WeightRow> stencil_rows(const DifferenceScheme& scheme, const Partition& p) {
  if (std::holds_alternative<FirstOrder>(scheme)) {
    std::vector<WeightRow> rows;
    rows.reserve(p.steps());
    for (std::size_t k = 1; k < p.count(); ++k) rows.push_back({{p[k - 1], p[k]}, {-1.0, 1.0}});
    return rows;
  }
  if (std::holds_alternative<SecondOrderBegyn>(scheme)) return detail::begyn_stencils(p);
  return detail::general_a_stencils(std::get<GeneralA>(scheme), p);
}

/// Rows of Y^n including normalization. The kernel is only consulted by
/// SecondOrderBegyn and GeneralA, whose normalization is E(ΔX)².
inline std::vector<WeightRow> weight_rows(const DifferenceScheme& scheme, const Partition& p, const KernelSpec* kernel) {
  auto rows = stencil_rows(scheme, p);
  if (const auto* fo = std::get_if<FirstOrder>(&scheme)) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double phi = evaluate_phi(fo->phi, p.gap(k + 1));
      if (!(phi > 0.0) || !std::isfinite(phi)) throw degenerate_error("phi(Δt) must be positive and finite");
      const double scale = 1.0 / std::sqrt(phi);
      for (double& w : rows[k].weights) w *= scale;
    }
    return rows;
  }
  const bool begyn = std::holds_alternative<SecondOrderBegyn>(scheme);
  const auto& k = detail::require_kernel(kernel, begyn ? "second-order" : "a-difference");
  const double n = static_cast<double>(p.steps());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double var = detail::row_variance(k, rows[j]);
    if (!(var > 0.0)) throw degenerate_error("zero normalizing variance in row " + std::to_string(j));
    const double scale = begyn ? std::sqrt(p.gap(j + 2) / var) : 1.0 / std::sqrt(n * var);
    for (double& w : rows[j].weights) w *= scale;
  }
  return rows;
}

inline std::vector<WeightRow> weight_rows(const DifferenceScheme& scheme, const Partition& p, const KernelSpec& kernel) {
  return weight_rows(scheme, p, &kernel);
}

// ---------------------------------------------------------------------------
// Covariance matrix
// ---------------------------------------------------------------------------

/// Dense symmetric Γ with Γ_jk = E[Y_j Y_k]. Stored exactly symmetric.
class CovMatrix {
 public:
  CovMatrix() = default;

  /// Accepts asymmetry up to 1e-8 relative (then symmetrizes); rejects
  /// non-finite entries and negative diagonals.
  explicit CovMatrix(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw data_error("covariance matrix must be square");
    if (!m.allFinite()) throw data_error("covariance matrix has non-finite entries");
    const double scale = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
    if (m.size() && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
      throw data_error("covariance matrix is not symmetric");
    }
    m_ = 0.5 * (m + m.transpose());
    if (m_.size() && m_.diagonal().minCoeff() < -1e-12 * scale) throw data_error("covariance matrix has a negative diagonal entry");
  }

  static CovMatrix identity(Eigen::Index n) { return CovMatrix(Eigen::MatrixXd::Identity(n, n)); }

  Eigen::Index dimension() const noexcept { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  const Eigen::MatrixXd& matrix() const noexcept { return m_; }

 private:
  struct trusted_t {};
  CovMatrix(Eigen::MatrixXd m, trusted_t) : m_(std::move(m)) {}
  friend CovMatrix build_gamma(const DifferenceScheme&, const Partition&, const KernelSpec&);

  Eigen::MatrixXd m_;
};

/// Cross covariances E[Y_k^{(rows_a)} Y_j^{(rows_b)}].
inline Eigen::MatrixXd cross_covariance(const KernelSpec& kernel, const std::vector<WeightRow>& rows_a,
                                        const std::vector<WeightRow>& rows_b) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows_a.size()), static_cast<Eigen::Index>(rows_b.size()));
  for (std::size_t i = 0; i < rows_a.size(); ++i) {
    for (std::size_t j = 0; j < rows_b.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          weighted_difference_cov(kernel, rows_a[i].times, rows_a[i].weights, rows_b[j].times, rows_b[j].weights);
    }
  }
  return out;
}

inline CovMatrix build_gamma(const DifferenceScheme& scheme, const Partition& p, const KernelSpec& kernel) {
  const auto rows = weight_rows(scheme, p, &kernel);
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ri = rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i; j < n; ++j) {
      const auto& rj = rows[static_cast<std::size_t>(j)];
      g(i, j) = g(j, i) = weighted_difference_cov(kernel, ri.times, ri.weights, rj.times, rj.weights);
    }
  }
  if (!g.allFinite()) throw data_error("covariance matrix has non-finite entries");
  return CovMatrix(std::move(g), CovMatrix::trusted_t{});
}

/// Entry (k, j) = E[Y_k^{(n)} Y_j^{(m)}] across two partitions.
inline Eigen::MatrixXd build_cross_gamma(const DifferenceScheme& scheme, const Partition& p_n, const Partition& p_m,
                                         const KernelSpec& kernel) {
  return cross_covariance(kernel, weight_rows(scheme, p_n, &kernel), weight_rows(scheme, p_m, &kernel));
}

inline std::string to_csv(const CovMatrix& g) {
  std::string out;
  for (Eigen::Index i = 0; i < g.dimension(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(g.dimension()));
    for (Eigen::Index j = 0; j < g.dimension(); ++j) row[static_cast<std::size_t>(j)] = g(i, j);
    out += detail::join(row);
    out += '\n';
  }
  return out;
}

inline CovMatrix cov_matrix_from_csv(const std::vector<std::string>& lines) {
  const auto n = static_cast<Eigen::Index>(lines.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = detail::parse_row(lines[static_cast<std::size_t>(i)], "matrix entry");
    if (static_cast<Eigen::Index>(row.size()) != n) throw data_error("matrix CSV is not square");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
  }
  return CovMatrix(m);
}

// ---------------------------------------------------------------------------
// Text form used by the CLI
// ---------------------------------------------------------------------------

/// `first:phi=one`, `first:phi=pow:<γ>`, `first:phi=table:<path>`, `begyn2`,
/// `gen-a:<a_0,...,a_p>` or `gen-a:<a_0,...,a_p>:<Δ>`.
inline DifferenceScheme parse_scheme(std::string_view text) {
  const std::string bad = "unknown scheme '" + std::string(text) + "'";
  if (text == "begyn2") return SecondOrderBegyn{};
  if (text == "first:phi=one" || text == "first") return FirstOrder{};
  if (text.starts_with("first:phi=pow:")) {
    double g = 0.0;
    if (!detail::try_parse_double(text.substr(14), g)) throw config_error(bad);
    return first_order_power(g);
  }
  if (text.starts_with("first:phi=table:")) return FirstOrder{load_phi_table(std::string(text.substr(16)))};
  if (text.starts_with("gen-a:")) {
    const auto parts = detail::split(text.substr(6), ':');
    if (parts.size() > 2) throw config_error(bad);
    std::vector<double> a;
    for (auto f : detail::split(parts[0], ',')) {
      double w = 0.0;
      if (!detail::try_parse_double(f, w)) throw config_error(bad);
      a.push_back(w);
    }
    double step = 0.0;
    if (parts.size() == 2 && (!detail::try_parse_double(parts[1], step) || !(step > 0.0))) throw config_error(bad);
    return make_general_a(std::move(a), step);
  }
  throw config_error(bad);
}

inline std::string describe(const DifferenceScheme& scheme) {
  if (const auto* fo = std::get_if<FirstOrder>(&scheme)) {
    if (std::holds_alternative<PhiOne>(fo->phi)) return "first:phi=one";
    if (const auto* pw = std::get_if<PhiPower>(&fo->phi)) return "first:phi=pow:" + detail::format_double(pw->gamma);
    return "first:phi=table";
  }
  if (std::holds_alternative<SecondOrderBegyn>(scheme)) return "begyn2";
  const auto& ga = std::get<GeneralA>(scheme);
  std::string out = "gen-a:" + detail::join(ga.a);
  if (ga.step > 0.0) out += ":" + detail::format_double(ga.step);
  return out;
}

}  // namespace qvar
