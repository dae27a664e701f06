#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qvar/detail/csv.hpp"
#include "qvar/detail/random.hpp"
#include "qvar/error.hpp"

namespace qvar {

/// Strictly increasing grid 0 = t_0 < t_1 < ... < t_{N-1} = T.
class Partition {
 public:
  explicit Partition(std::vector<double> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw usage_error("a partition needs at least two points");
    if (points_.front() != 0.0) throw data_error("a partition must start at 0");
    mesh_ = 0.0;
    min_mesh_ = INFINITY;
    for (std::size_t k = 1; k < points_.size(); ++k) {
      if (!std::isfinite(points_[k])) throw data_error("non-finite partition point");
      const double gap = points_[k] - points_[k - 1];
      if (!(gap > 0.0)) throw data_error("partition points must be strictly increasing (index " + std::to_string(k) + ")");
      mesh_ = std::max(mesh_, gap);
      min_mesh_ = std::min(min_mesh_, gap);
    }
  }

  const std::vector<double>& points() const noexcept { return points_; }
  double operator[](std::size_t k) const { return points_[k]; }

  /// Number of points N(π).
  std::size_t count() const noexcept { return points_.size(); }
  /// Number of intervals, N(π) - 1.
  std::size_t steps() const noexcept { return points_.size() - 1; }
  double horizon() const noexcept { return points_.back(); }
  double mesh() const noexcept { return mesh_; }
  double min_mesh() const noexcept { return min_mesh_; }
  /// Δt_k = t_k - t_{k-1}, k >= 1.
  double gap(std::size_t k) const { return points_[k] - points_[k - 1]; }

  bool operator==(const Partition& other) const { return points_ == other.points_; }

 private:
  std::vector<double> points_;
  double mesh_;
  double min_mesh_;
};

inline Partition make_uniform(std::size_t n, double horizon = 1.0) {
  if (n == 0) throw usage_error("make_uniform: n must be >= 1");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw usage_error("make_uniform: T must be positive");
  std::vector<double> pts(n + 1);
  const double dn = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) pts[k] = horizon * static_cast<double>(k) / dn;
  pts[n] = horizon;
  return Partition(std::move(pts));
}

/// Uniform grid with every interior point moved by at most
/// δ = (T/n)(c-1)/(2(c+1)), so the worst case gap ratio is
/// (h+2δ)/(h-2δ) = c. Deterministic in seed.
inline Partition make_perturbed(std::size_t n, double horizon, double ratio_cap, std::uint64_t seed) {
  if (!(ratio_cap >= 1.0) || !std::isfinite(ratio_cap)) throw usage_error("make_perturbed: ratio_cap must be >= 1");
  auto base = make_uniform(n, horizon);
  if (ratio_cap == 1.0 || n == 1) return base;
  std::vector<double> pts = base.points();
  const double h = horizon / static_cast<double>(n);
  // Shrink by a few ulps so rounding of t_k + jitter cannot break the bound.
  const double delta = h * (ratio_cap - 1.0) / (2.0 * (ratio_cap + 1.0)) * (1.0 - 1e-12);
  detail::CounterStream rng(seed, 0x70617274ULL);
  for (std::size_t k = 1; k < n; ++k) pts[k] += delta * (2.0 * rng.uniform() - 1.0);
  return Partition(std::move(pts));
}

/// |π| / m(π) >= 1.
inline double ratio(const Partition& p) { return p.mesh() / p.min_mesh(); }

inline std::string to_csv_row(const Partition& p) { return detail::join(p.points()); }

inline Partition partition_from_csv_row(std::string_view line) {
  return Partition(detail::parse_row(line, "partition point"));
}

inline Partition load_partition(const std::string& path) {
  const auto lines = detail::read_lines(path);
  if (lines.size() != 1) throw data_error("partition file '" + path + "' must contain exactly one CSV row");
  return partition_from_csv_row(lines.front());
}

/// Parses `uniform:<n>`, `perturbed:<n>:<cap>:<seed>` or `file:<path>`.
inline Partition parse_partition(std::string_view text, double horizon = 1.0) {
  const auto parts = detail::split(text, ':');
  auto integer = [&](std::size_t i) -> std::uint64_t {
    std::uint64_t v = 0;
    if (parts.size() <= i) throw config_error("partition '" + std::string(text) + "': missing field");
    const auto f = detail::trim(parts[i]);
    const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (f.empty() || ec != std::errc() || end != f.data() + f.size()) {
      throw config_error("partition '" + std::string(text) + "': expected a non-negative integer field");
    }
    return v;
  };
  if (parts.front() == "uniform" && parts.size() == 2) return make_uniform(integer(1), horizon);
  if (parts.front() == "perturbed" && parts.size() == 4) {
    double cap = 0.0;
    if (!detail::try_parse_double(parts[2], cap)) throw config_error("partition '" + std::string(text) + "': bad ratio cap");
    return make_perturbed(integer(1), horizon, cap, integer(3));
  }
  if (parts.front() == "file" && parts.size() >= 2) return load_partition(std::string(text.substr(5)));
  throw config_error("unknown partition spec '" + std::string(text) + "'");
}

/// n = 2^j for j in [jmin, jmax].
inline std::vector<std::size_t> dyadic_levels(unsigned jmin, unsigned jmax) {
  std::vector<std::size_t> out;
  for (unsigned j = jmin; j <= jmax; ++j) out.push_back(std::size_t{1} << j);
  return out;
}

/// |π_n|·log n along a schedule of partitions; a sequence tending to zero is
/// the evidence for |π_n| = o(1/log n). The trend verdict lives in limits.
inline std::vector<double> mesh_log_products(const std::vector<std::size_t>& ns, const std::vector<Partition>& parts) {
  if (ns.size() != parts.size()) throw usage_error("mesh_log_products: schedule and partitions differ in length");
  std::vector<double> out;
  out.reserve(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) out.push_back(parts[i].mesh() * std::log(static_cast<double>(ns[i])));
  return out;
}

}  // namespace qvar
