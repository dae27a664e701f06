#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qvar::detail {

// SplitMix64 finalizer (Steele, Lea & Flood). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based stream: draw i of stream (seed, id) is mix64(key + i·φ64)
/// with key derived from (seed, id). Any draw is a pure function of
/// (seed, id, i), so replicates never depend on scheduling order.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : key_(mix64(mix64(seed ^ 0x6A09E667F3BCC909ULL) + mix64(stream_id + 0x3C6EF372FE94F82BULL))) {}

  std::uint64_t next_u64() noexcept { return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  /// Uniform on the open interval (0,1), 53-bit resolution.
  double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal via the Box-Muller transform; draws come in pairs.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qvar::detail
