#pragma once

// Monte Carlo verification: sample Y ~ N(0, Γ), form replicate values of
// V_n = Σ_k Y_k², and compare their empirical law with the exact moments.
//
// RNG contract: replicate r draws its standard normals from
// detail::CounterStream(seed, r) (SplitMix64 finalizer over a per-stream
// counter, Box-Muller pairs). Replicates are processed in fixed blocks of
// kReplicateBlock indices, so output bits do not depend on the number of
// worker threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qvar/detail/csv.hpp"
#include "qvar/detail/random.hpp"
#include "qvar/error.hpp"
#include "qvar/schemes.hpp"
#include "qvar/spectral.hpp"

namespace qvar {

inline constexpr std::size_t kReplicateBlock = 64;

enum class FactorMethod {
  Eigen,     // Q·diag(√λ), tolerant of tiny negative eigenvalues
  Cholesky,  // lower-triangular LLᵀ; falls back to Eigen if Γ is not numerically PD
};

struct McConfig {
  std::size_t replicates = 10000;
  std::uint64_t seed = 0;
  double jitter = 1e-10;  // PSD clip tolerance relative to λmax
  unsigned workers = 1;
  FactorMethod method = FactorMethod::Eigen;
};

struct McResult {
  std::size_t replicates = 0;
  double empirical_mean = 0.0;
  double empirical_var = 0.0;
  double empirical_fourth_central = 0.0;
  double ks_distance = 0.0;
  double se_mean = 0.0;
  double se_var = 0.0;
  double se_fourth = 0.0;  // batch-means estimate
};

/// Γ = F·Fᵀ.
struct Factor {
  Eigen::MatrixXd f;
  FactorMethod method = FactorMethod::Eigen;
  double min_eigenvalue = 0.0;  // Eigen method only
};

inline Factor factorize(const CovMatrix& g, double jitter = 1e-10, FactorMethod method = FactorMethod::Eigen) {
  if (g.dimension() == 0) throw usage_error("factorize: empty covariance matrix");
  if (method == FactorMethod::Cholesky) {
    Eigen::LLT<Eigen::MatrixXd> llt(g.matrix());
    if (llt.info() == Eigen::Success) return {llt.matrixL().toDenseMatrix(), FactorMethod::Cholesky, 0.0};
  }
  const auto ed = eigen_decompose(g);
  const double lmax = ed.values.cwiseAbs().maxCoeff();
  const double lmin = ed.values.minCoeff();
  if (lmin < -jitter * lmax) {
    throw not_psd_error("covariance matrix is not positive semidefinite: eigenvalue " + detail::format_double(lmin) +
                            " below -" + detail::format_double(jitter) + "·λmax",
                        lmin);
  }
  const Eigen::VectorXd root = ed.values.cwiseMax(0.0).cwiseSqrt();
  return {ed.vectors * root.asDiagonal(), FactorMethod::Eigen, lmin};
}

namespace detail {

inline void fill_normals(Eigen::Ref<Eigen::VectorXd> col, std::uint64_t seed, std::uint64_t stream) {
  CounterStream rng(seed, stream);
  for (Eigen::Index i = 0; i < col.size(); ++i) col(i) = rng.normal();
}

// Runs body(block) for every block index, spreading blocks over workers.
template <typename Body>
void for_each_block(std::size_t blocks, unsigned workers, Body&& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(blocks, 1))));
  if (workers == 1) {
    for (std::size_t b = 0; b < blocks; ++b) body(b);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < blocks; b += workers) body(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// Replicate values of the uncentered sum Σ_k Y_k², Y = F·ξ.
inline std::vector<double> sample_v_replicates(const Factor& factor, const McConfig& cfg) {
  if (cfg.replicates == 0) throw usage_error("replicates must be >= 1");
  std::vector<double> out(cfg.replicates);
  const std::size_t blocks = (cfg.replicates + kReplicateBlock - 1) / kReplicateBlock;
  detail::for_each_block(blocks, cfg.workers, [&](std::size_t b) {
    const std::size_t first = b * kReplicateBlock;
    const std::size_t count = std::min(kReplicateBlock, cfg.replicates - first);
    Eigen::MatrixXd xi(factor.f.cols(), static_cast<Eigen::Index>(count));
    for (std::size_t c = 0; c < count; ++c) detail::fill_normals(xi.col(static_cast<Eigen::Index>(c)), cfg.seed, first + c);
    const Eigen::MatrixXd y = factor.f * xi;
    for (std::size_t c = 0; c < count; ++c) out[first + c] = y.col(static_cast<Eigen::Index>(c)).squaredNorm();
  });
  return out;
}

inline std::vector<double> sample_v_replicates(const CovMatrix& g, const McConfig& cfg) {
  return sample_v_replicates(factorize(g, cfg.jitter, cfg.method), cfg);
}

/// Joint samples of (X_{t_0}, ..., X_{t_N}) on the partition, one path per
/// column. Sampled through the increment vector (well conditioned for the
/// built-in families) and summed; X_{t_0} is drawn only if it has variance.
inline Eigen::MatrixXd sample_paths(const KernelSpec& kernel, const Partition& p, std::size_t count,
                                    std::uint64_t seed, FactorMethod method = FactorMethod::Cholesky,
                                    double jitter = 1e-10) {
  if (count == 0) throw usage_error("sample_paths: count must be >= 1");
  auto rows = stencil_rows(FirstOrder{}, p);
  const bool random_start = covariance(kernel, p[0], p[0]) > 0.0;
  if (random_start) rows.insert(rows.begin(), WeightRow{{p[0]}, {1.0}});
  const CovMatrix g(cross_covariance(kernel, rows, rows));
  const auto factor = factorize(g, jitter, method);

  const auto points = static_cast<Eigen::Index>(p.count());
  Eigen::MatrixXd paths(points, static_cast<Eigen::Index>(count));
  Eigen::VectorXd xi(factor.f.cols());
  for (std::size_t c = 0; c < count; ++c) {
    detail::fill_normals(xi, seed, c);
    const Eigen::VectorXd y = factor.f * xi;
    Eigen::Index src = 0;
    double level = random_start ? y(src++) : 0.0;
    paths(0, static_cast<Eigen::Index>(c)) = level;
    for (Eigen::Index k = 1; k < points; ++k) {
      level += y(src++);
      paths(k, static_cast<Eigen::Index>(c)) = level;
    }
  }
  return paths;
}

/// Φ(x) = ½·erfc(−x/√2); glibc erfc is accurate to a few ulp, far inside 1e-12.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// sup_x |F_emp(x) − Φ(x)| for an already standardized sample.
inline double ks_distance_normal(std::vector<double> z) {
  if (z.empty()) throw usage_error("ks distance of an empty sample");
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double cdf = normal_cdf(z[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  return std::clamp(d, 0.0, 1.0);
}

namespace detail {

inline double central_moment(std::span<const double> z, double mean, int order) {
  double acc = 0.0;
  for (double v : z) acc += std::pow(v - mean, order);
  return acc / static_cast<double>(z.size());
}

}  // namespace detail

/// Moments and KS distance of (v − center)/scale.
inline McResult empirical_stats(std::span<const double> vs, double center, double scale) {
  if (vs.size() < 2) throw usage_error("empirical_stats needs at least 2 values");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw usage_error("empirical_stats: scale must be positive");
  std::vector<double> z(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) z[i] = (vs[i] - center) / scale;
  const double n = static_cast<double>(z.size());

  McResult r;
  r.replicates = z.size();
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= n;
  const double m2 = detail::central_moment(z, mean, 2);
  const double m4 = detail::central_moment(z, mean, 4);
  r.empirical_mean = mean;
  r.empirical_var = m2 * n / (n - 1.0);
  r.empirical_fourth_central = m4;
  r.se_mean = std::sqrt(r.empirical_var / n);
  r.se_var = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);

  const std::size_t batches = std::min<std::size_t>(20, z.size() / 2);
  if (batches >= 2) {
    const std::size_t per = z.size() / batches;
    std::vector<double> fourth(batches);
    for (std::size_t b = 0; b < batches; ++b) {
      std::span<const double> part(z.data() + b * per, per);
      double bm = 0.0;
      for (double v : part) bm += v;
      fourth[b] = detail::central_moment(part, bm / static_cast<double>(per), 4);
    }
    double fm = 0.0;
    for (double v : fourth) fm += v;
    fm /= static_cast<double>(batches);
    const double fv = detail::central_moment(fourth, fm, 2) * static_cast<double>(batches) / static_cast<double>(batches - 1);
    r.se_fourth = std::sqrt(fv / static_cast<double>(batches));
  }
  r.ks_distance = ks_distance_normal(std::move(z));
  return r;
}

inline nlohmann::ordered_json to_json(const McResult& r) {
  return nlohmann::ordered_json{{"replicates", r.replicates},
                                {"empirical_mean", r.empirical_mean},
                                {"empirical_var", r.empirical_var},
                                {"empirical_fourth_central", r.empirical_fourth_central},
                                {"ks_distance", r.ks_distance},
                                {"se_mean", r.se_mean},
                                {"se_var", r.se_var},
                                {"se_fourth", r.se_fourth}};
}

inline std::string replicates_csv(std::span<const double> vs) {
  std::string out = "replicate,v\n";
  for (std::size_t i = 0; i < vs.size(); ++i) out += std::to_string(i) + "," + detail::format_double(vs[i]) + "\n";
  return out;
}

}  // namespace qvar
