#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace vacfilter {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based stream keyed by (seed, trial index). Draw k of trial i is a
/// pure function of (seed, i, k), so how trials are split across threads
/// cannot change any result.
class TrialRng {
 public:
  TrialRng(std::uint64_t seed, std::uint64_t trial)
      : key_(mix64(mix64(seed) ^ (trial * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL))) {}

  std::uint64_t next_u64() { return mix64(key_ ^ mix64(++counter_)); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (one variate per call, two draws).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace vacfilter
