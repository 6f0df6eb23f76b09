#pragma once

#include <cmath>
#include <cstdint>

namespace adaptermix {

/*
 * SplitMix64. Every piece of randomness in the project (corpus content,
 * weight init, batch shuffling) flows through this generator so that runs
 * reproduce bit-identically across platforms from integer seeds alone.
 */
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53 bits of precision.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n). Modulo bias is irrelevant at our sizes.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  /// Box-Muller; consumes two uniforms per call, never caches.
  double normal(double mean, double stddev) {
    // u1 in (0, 1] so the log stays finite.
    const double u1 =
        (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_double();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * mag * std::cos(6.283185307179586476925287 * u2);
  }

 private:
  std::uint64_t state_;
};

/// Derives an independent stream seed from (seed, stream id).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 g(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
  return g.next_u64();
}

}  // namespace adaptermix
