// ============================================================================
// rng.hpp -- counter-based random streams with cross-platform determinism
//
// Stream discipline: a (seed, stream_id) pair fully determines the stream.
// Substreams for independent work items (probe points, detectors, Monte
// Carlo repetitions) are derived by stream_id, never by sharing state, so
// generation order and thread count cannot change the output.
//
// splitmix64 is used as the generator; every draw is a pure function of the
// 64-bit state, with no platform- or libstdc++-dependent behavior. Binomial
// samples use exact CDF inversion (one uniform per sample).
// ============================================================================
#pragma once
#include <cstdint>

namespace epdc {

/// One splitmix64 scramble round.
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id)
      : state_(splitmix64_mix(splitmix64_mix(seed + 0x9E3779B97F4A7C15ULL) + stream_id)) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return splitmix64_mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Exact Binomial(trials, prob) sample by CDF inversion, walking outward
  /// from the mode (expected O(sqrt(trials * prob)) pmf terms). Consumes
  /// exactly one uniform.
  long long binomial(long long trials, double prob);

 private:
  std::uint64_t state_;
};

}  // namespace epdc
