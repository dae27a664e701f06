#pragma once

// Exact linear-algebra quantities of Γ: norms, eigenvalues, and the second
// and fourth central moments of the quadratic variation V_n = Σ_k Y_k².

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qvar/error.hpp"
#include "qvar/schemes.hpp"

namespace qvar {

/// Coefficient of trace(Γ⁴) in E(V_n − E V_n)⁴ = 12·trace(Γ²)² + c₄·trace(Γ⁴).
/// Pinned by the Wick enumeration in isserlis_oracle and by the χ²₁ case
/// E(ξ²−1)⁴ = 60 = 12 + c₄.
inline constexpr double kFourthTraceCoefficient = 48.0;

struct NormReport {
  double trace = 0.0;
  double frobenius = 0.0;
  double spectral = 0.0;  // max |λ|
  double one_norm = 0.0;  // max column absolute sum
};

struct MomentReport {
  double mean_vn = 0.0;  // trace Γ
  double var_vn = 0.0;
  double fourth_central = 0.0;
  double kurtosis_excess = 0.0;
  std::vector<double> eigenvalues;  // descending by |λ|
  double lambda_star = 0.0;
};

namespace detail {

inline bool is_diagonal(const Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (i != j && m(i, j) != 0.0) return false;
  return true;
}

}  // namespace detail

/// Eigenvalues sorted by decreasing magnitude (ties: larger value first).
/// Exactly diagonal input skips the solver and returns the diagonal.
inline std::vector<double> eigenvalues(const CovMatrix& g) {
  if (g.dimension() == 0) return {};
  std::vector<double> out;
  if (detail::is_diagonal(g.matrix())) {
    const Eigen::VectorXd d = g.matrix().diagonal();
    out.assign(d.data(), d.data() + d.size());
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.matrix(), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw data_error("symmetric eigensolver did not converge");
    out.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  }
  std::stable_sort(out.begin(), out.end(), [](double a, double b) {
    return std::abs(a) != std::abs(b) ? std::abs(a) > std::abs(b) : a > b;
  });
  return out;
}

/// Full decomposition Γ = Q diag(λ) Qᵀ, eigenvalues ascending (Eigen order).
struct EigenDecomposition {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

inline EigenDecomposition eigen_decompose(const CovMatrix& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.matrix(), Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw data_error("symmetric eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Norms given precomputed eigenvalues (avoids a second eigensolve).
inline NormReport norms(const CovMatrix& g, std::span<const double> eigs) {
  const auto& m = g.matrix();
  if (!m.allFinite()) throw data_error("non-finite matrix entries");
  NormReport r;
  if (m.size() == 0) return r;
  r.trace = m.trace();
  r.frobenius = m.norm();
  r.one_norm = m.cwiseAbs().colwise().sum().maxCoeff();
  for (double l : eigs) r.spectral = std::max(r.spectral, std::abs(l));
  return r;
}

inline NormReport norms(const CovMatrix& g) {
  const auto eigs = eigenvalues(g);
  return norms(g, eigs);
}

namespace detail {

// trace(Γ⁴) = ‖Γ²‖_F², with Γ² = ΓΓᵀ formed as a symmetric rank update
// (lower triangle only).
inline double trace_fourth_power(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  sq.selfadjointView<Eigen::Lower>().rankUpdate(m);
  double off = 0.0, diag = 0.0;
  for (Eigen::Index j = 0; j < sq.cols(); ++j) {
    diag += sq(j, j) * sq(j, j);
    for (Eigen::Index i = j + 1; i < sq.rows(); ++i) off += sq(i, j) * sq(i, j);
  }
  return diag + 2.0 * off;
}

inline bool close_relative(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace detail

/// Moments of V_n given precomputed eigenvalues. trace(Γ²) and trace(Γ⁴)
/// are taken from matrix products and re-derived from the spectrum; the two
/// routes must agree within 1e-9 relative.
inline MomentReport qv_moments(const CovMatrix& g, std::span<const double> eigs) {
  if (g.dimension() == 0) throw usage_error("qv_moments: empty covariance matrix");
  const auto& m = g.matrix();
  const double tr2 = m.squaredNorm();
  const double tr4 = detail::is_diagonal(m) ? m.diagonal().array().pow(4).sum() : detail::trace_fourth_power(m);

  double eig2 = 0.0, eig4 = 0.0;
  for (double l : eigs) {
    eig2 += l * l;
    eig4 += l * l * l * l;
  }
  if (!detail::close_relative(tr2, eig2, 1e-9) || !detail::close_relative(tr4, eig4, 1e-9)) {
    throw data_error("trace powers disagree with the spectrum; eigensolve is unreliable");
  }

  MomentReport r;
  r.mean_vn = m.trace();
  r.var_vn = 2.0 * tr2;
  r.fourth_central = 12.0 * tr2 * tr2 + kFourthTraceCoefficient * tr4;
  r.kurtosis_excess = r.var_vn > 0.0 ? r.fourth_central / (r.var_vn * r.var_vn) - 3.0 : 0.0;
  r.eigenvalues.assign(eigs.begin(), eigs.end());
  for (double l : eigs) r.lambda_star = std::max(r.lambda_star, std::abs(l));
  return r;
}

inline MomentReport qv_moments(const CovMatrix& g) {
  const auto eigs = eigenvalues(g);
  return qv_moments(g, eigs);
}

namespace detail {

// Σ over perfect matchings of idx of Π Γ(pair). Plain recursion.
inline double wick_pairings(const Eigen::MatrixXd& g, std::vector<Eigen::Index>& idx) {
  if (idx.empty()) return 1.0;
  const Eigen::Index first = idx.front();
  double total = 0.0;
  for (std::size_t j = 1; j < idx.size(); ++j) {
    const Eigen::Index partner = idx[j];
    std::vector<Eigen::Index> rest;
    rest.reserve(idx.size() - 2);
    for (std::size_t k = 1; k < idx.size(); ++k) {
      if (k != j) rest.push_back(idx[k]);
    }
    total += g(first, partner) * wick_pairings(g, rest);
  }
  return total;
}

}  // namespace detail

/// Brute-force E[(V_n − E V_n)^power], power ∈ {2, 4}, for n ≤ 8.
///
/// Expands Π_i (Y_{k_i}² − Γ_{k_i k_i}) over every index tuple and every
/// subset of factors, evaluating each Gaussian product moment by explicit
/// enumeration of Wick pairings. Exponential cost; a test oracle only.
inline double isserlis_oracle(const CovMatrix& g, int power) {
  if (power != 2 && power != 4) throw usage_error("isserlis_oracle: power must be 2 or 4");
  const Eigen::Index n = g.dimension();
  if (n == 0) throw usage_error("isserlis_oracle: empty covariance matrix");
  if (n > 8) throw capacity_error("isserlis_oracle: enumeration limited to n <= 8");
  const auto& m = g.matrix();

  std::vector<Eigen::Index> tuple(static_cast<std::size_t>(power), 0);
  double total = 0.0;
  std::vector<Eigen::Index> idx;
  while (true) {
    for (unsigned mask = 0; mask < (1u << power); ++mask) {
      idx.clear();
      double coeff = 1.0;
      for (int i = 0; i < power; ++i) {
        const Eigen::Index k = tuple[static_cast<std::size_t>(i)];
        if (mask & (1u << i)) {
          idx.push_back(k);
          idx.push_back(k);
        } else {
          coeff *= -m(k, k);
        }
      }
      total += coeff * detail::wick_pairings(m, idx);
    }
    std::size_t pos = 0;
    while (pos < tuple.size() && ++tuple[pos] == n) tuple[pos++] = 0;
    if (pos == tuple.size()) break;
  }
  return total;
}

/// Field names are part of the output contract.
inline nlohmann::ordered_json to_json(const NormReport& norms_report, const MomentReport& moments) {
  return nlohmann::ordered_json{
      {"trace", norms_report.trace},
      {"frobenius", norms_report.frobenius},
      {"spectral", norms_report.spectral},
      {"one_norm", norms_report.one_norm},
      {"var_vn", moments.var_vn},
      {"fourth_central", moments.fourth_central},
      {"kurtosis_excess", moments.kurtosis_excess},
      {"lambda_star", moments.lambda_star},
  };
}

}  // namespace qvar
