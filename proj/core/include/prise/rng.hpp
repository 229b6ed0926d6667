#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace prise {

/// Seeded random source with hand-rolled distribution transforms.
///
/// std::mt19937_64's output stream is pinned by the standard, but the
/// standard *distributions* are not; every transform here is spelled out
/// so that a seed produces the same values on any conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [lo, hi] via rejection sampling.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller (two uniforms per draw, no caching).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Gumbel(0, 1): -log(-log(U)).
  double gumbel();

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::int64_t i = static_cast<std::int64_t>(items.size()) - 1; i > 0; --i) {
      const std::int64_t j = uniform_int(0, i);
      std::swap(items[static_cast<std::size_t>(i)], items[static_cast<std::size_t>(j)]);
    }
  }

  /// k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k);

 private:
  std::mt19937_64 engine_;
};

/// Derives a named sub-seed from a master seed (FNV-1a over the tag,
/// mixed with the master). All module-level randomness flows through this.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index);

}  // namespace prise
