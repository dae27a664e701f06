#pragma once

// Convergence diagnostics for V_n: energy, 2-planar variation, the almost
// sure condition ‖Γ‖₂ = o(1/log n), the eigenvalue CLT ratios and the
// constant-free Berry-Esseen quantities.
//
// Asymptotic statements cannot be decided from finitely many levels. Every
// verdict here is a trend fit over the supplied schedule and is always
// reported together with the raw sequence.

#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qvar/detail/csv.hpp"
#include "qvar/detail/fit.hpp"
#include "qvar/error.hpp"
#include "qvar/schemes.hpp"
#include "qvar/spectral.hpp"

namespace qvar {

struct ConditionReport {
  std::size_t n = 0;
  double energy = 0.0;           // trace Γ
  double planar_nn = 0.0;        // ‖Γ‖_F²
  double spectral_logn = 0.0;    // ‖Γ‖₂·log n
  double one_norm_h = 0.0;       // ‖Γ‖₁
  double clt_ratio = 0.0;        // Σλ⁴ / (Σλ²)²
  double lindeberg_ratio = 0.0;  // λ* / √Var V_n
  double be_quantity = 0.0;      // √(kurtosis excess)
  double be_lambda_bound = 0.0;  // √n·λ*
};

inline double energy_trace(const CovMatrix& g) { return g.matrix().trace(); }

/// Σ_k Σ_j (E[Y_k^{(n)} Y_j^{(m)}])².
inline double planar_variation(const DifferenceScheme& scheme, const KernelSpec& kernel, const Partition& p_n,
                               const Partition& p_m) {
  return build_cross_gamma(scheme, p_n, p_m, kernel).squaredNorm();
}

struct CltRatios {
  double clt_ratio = 0.0;
  double lindeberg_ratio = 0.0;
};

inline CltRatios clt_ratios(const MomentReport& m) {
  if (!(m.var_vn > 0.0)) throw degenerate_error("clt_ratios: Var(V_n) = 0");
  double s2 = 0.0, s4 = 0.0;
  for (double l : m.eigenvalues) {
    s2 += l * l;
    s4 += l * l * l * l;
  }
  if (!(s2 > 0.0)) throw degenerate_error("clt_ratios: empty spectrum");
  return {s4 / (s2 * s2), m.lambda_star / std::sqrt(m.var_vn)};
}

struct BerryEsseen {
  double be_quantity = 0.0;
  double be_lambda_bound = 0.0;
};

/// Both bounds are reported up to their unspecified constants; `multiplier`
/// lets a caller plug in a constant of their choosing.
inline BerryEsseen berry_esseen(const MomentReport& m, std::size_t n, double multiplier = 1.0) {
  if (!(m.var_vn > 0.0)) throw degenerate_error("berry_esseen: Var(V_n) = 0");
  return {multiplier * std::sqrt(std::max(0.0, m.kurtosis_excess)),
          multiplier * std::sqrt(static_cast<double>(n)) * m.lambda_star};
}

/// All per-level diagnostics from one eigensolve.
inline ConditionReport condition_report(std::size_t n, const CovMatrix& g) {
  const auto eigs = eigenvalues(g);
  const auto nr = norms(g, eigs);
  const auto mr = qv_moments(g, eigs);
  const auto clt = clt_ratios(mr);
  const auto be = berry_esseen(mr, n);
  ConditionReport r;
  r.n = n;
  r.energy = nr.trace;
  r.planar_nn = nr.frobenius * nr.frobenius;
  r.spectral_logn = nr.spectral * std::log(static_cast<double>(n));
  r.one_norm_h = nr.one_norm;
  r.clt_ratio = clt.clt_ratio;
  r.lindeberg_ratio = clt.lindeberg_ratio;
  r.be_quantity = be.be_quantity;
  r.be_lambda_bound = be.be_lambda_bound;
  return r;
}

// ---------------------------------------------------------------------------
// Almost-sure classification
// ---------------------------------------------------------------------------

enum class AsVerdict { AsSufficient, ProbOnly, NoConclusion };

inline std::string_view to_string(AsVerdict v) {
  switch (v) {
    case AsVerdict::AsSufficient: return "as_sufficient";
    case AsVerdict::ProbOnly: return "prob_only";
    case AsVerdict::NoConclusion: return "no_conclusion";
  }
  return "no_conclusion";
}

struct AsLevel {
  std::size_t n = 0;
  double spectral = 0.0;
  double spectral_logn = 0.0;
};

struct AsClassification {
  std::vector<AsLevel> levels;
  AsVerdict verdict = AsVerdict::NoConclusion;
};

namespace detail {

inline bool strictly_decreasing(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

// Log-log slope over the last half of the schedule (at least two points).
inline double tail_slope(std::span<const std::size_t> ns, std::span<const double> v) {
  const std::size_t m = std::max<std::size_t>(2, (ns.size() + 1) / 2);
  std::vector<double> x, y;
  for (std::size_t i = ns.size() - m; i < ns.size(); ++i) {
    if (!(v[i] > 0.0)) return 0.0;
    x.push_back(std::log(static_cast<double>(ns[i])));
    y.push_back(std::log(v[i]));
  }
  return least_squares(x, y).slope;
}

}  // namespace detail

/// Verdict from (n, ‖Γ⁽ⁿ⁾‖₂) pairs:
///   as_sufficient  ‖Γ‖₂·log n strictly decreasing with negative tail slope;
///   prob_only      only ‖Γ‖₂ itself shows that trend;
///   no_conclusion  otherwise.
inline AsClassification as_classify_spectral(std::span<const std::size_t> ns, std::span<const double> spectral) {
  if (ns.size() != spectral.size()) throw usage_error("as_classify: schedule and values differ in length");
  if (ns.size() < 2) throw usage_error("as_classify: need at least 2 levels");
  for (std::size_t i = 1; i < ns.size(); ++i) {
    if (!(ns[i] > ns[i - 1])) throw usage_error("as_classify: levels must be strictly increasing");
  }
  if (ns.front() < 2) throw usage_error("as_classify: levels must be >= 2 (log n > 0)");
  AsClassification out;
  std::vector<double> logn_values;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double sl = spectral[i] * std::log(static_cast<double>(ns[i]));
    out.levels.push_back({ns[i], spectral[i], sl});
    logn_values.push_back(sl);
  }
  if (detail::strictly_decreasing(logn_values) && detail::tail_slope(ns, logn_values) < 0.0) {
    out.verdict = AsVerdict::AsSufficient;
  } else if (detail::strictly_decreasing(spectral) && detail::tail_slope(ns, spectral) < 0.0) {
    out.verdict = AsVerdict::ProbOnly;
  } else {
    out.verdict = AsVerdict::NoConclusion;
  }
  return out;
}

inline AsClassification as_classify(const std::vector<std::pair<std::size_t, CovMatrix>>& schedule) {
  std::vector<std::size_t> ns;
  std::vector<double> spectral;
  for (const auto& [n, g] : schedule) {
    ns.push_back(n);
    spectral.push_back(norms(g).spectral);
  }
  return as_classify_spectral(ns, spectral);
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline constexpr std::string_view kConditionCsvHeader =
    "n,energy,planar_nn,spectral_logn,one_norm_h,clt_ratio,lindeberg_ratio,be_quantity,be_lambda_bound";

inline std::string to_csv_row(const ConditionReport& r) {
  std::ostringstream os;
  os << r.n;
  for (double v : {r.energy, r.planar_nn, r.spectral_logn, r.one_norm_h, r.clt_ratio, r.lindeberg_ratio,
                   r.be_quantity, r.be_lambda_bound}) {
    os << ',' << detail::format_double(v);
  }
  return os.str();
}

inline nlohmann::ordered_json to_json(const ConditionReport& r) {
  return nlohmann::ordered_json{{"n", r.n},
                                {"energy", r.energy},
                                {"planar_nn", r.planar_nn},
                                {"spectral_logn", r.spectral_logn},
                                {"one_norm_h", r.one_norm_h},
                                {"clt_ratio", r.clt_ratio},
                                {"lindeberg_ratio", r.lindeberg_ratio},
                                {"be_quantity", r.be_quantity},
                                {"be_lambda_bound", r.be_lambda_bound}};
}

}  // namespace qvar
