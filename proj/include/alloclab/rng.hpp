// SPDX-License-Identifier: Apache-2.0
//
// Self-contained pseudo-random number generation.  The standard library's
// distributions are implementation-defined, so everything that must be
// reproducible across platforms (uniform doubles, bounded integers, seed
// derivation) is implemented here from first principles.
#pragma once

#include <cstdint>

namespace alloclab {

/// SplitMix64 step function; used to expand seeds and derive substreams.
struct SplitMix64 {
  std::uint64_t state = 0;

  constexpr std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
};

/// xoshiro256** generator.  One instance per worker; never shared across
/// threads.  Seeding runs the 64-bit seed through SplitMix64 so that nearby
/// seeds yield unrelated streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    SplitMix64 sm{seed};
    for (auto& w : state_) w = sm.next();
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in the open interval (0, 1): 53 random bits centred in
  /// their bucket, so 0 and 1 are never returned.  Safe for log() and for
  /// inverse-CDF walks.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound) via Lemire's multiply-shift with the
  /// rejection step, so the result is exactly uniform.  bound must be >= 1.
  std::uint64_t below(std::uint64_t bound) {
    unsigned __int128 m =
        static_cast<unsigned __int128>(next_u64()) * bound;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < bound) {
      const std::uint64_t threshold = (0ull - bound) % bound;
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::int64_t below_i64(std::int64_t bound) {
    return static_cast<std::int64_t>(below(static_cast<std::uint64_t>(bound)));
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

/// Deterministically derives an independent substream seed from a master
/// seed and two indices (schedule point, replication).  Pure function of its
/// arguments, so records can be produced in any order by any number of
/// workers and still match.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t point,
                                 std::uint64_t replication) {
  SplitMix64 sm{master};
  std::uint64_t h = sm.next();
  sm.state = h ^ (0xD1B54A32D192ED03ull * (point + 1));
  h = sm.next();
  sm.state = h ^ (0x8CB92BA72F3D8DD7ull * (replication + 1));
  return sm.next();
}

}  // namespace alloclab
