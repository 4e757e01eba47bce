// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace avsep {

// Deterministic RNG used everywhere randomness is needed.
//
// std::mt19937_64 is bit-exact across platforms, but the standard
// distributions are not, so uniform/normal mappings are done by hand.
// Keyed construction derives independent streams from (seed, path...),
// which makes dataset generation and per-epoch dynamic mixing pure
// functions of their keys.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derive a stream from a base seed and a key path, e.g.
  // Rng::keyed(seed, {kStreamMix, epoch, sample_index}).
  static Rng keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix(seed ^ 0x9e3779b97f4a7c15ull);
    for (std::uint64_t p : path) {
      s = splitmix(s ^ splitmix(p + 0x632be59bd9b4e019ull));
    }
    return Rng(s);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  /// Standard normal via Box-Muller (deterministic, no cached spare).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
};

// Stream tags for keyed RNG derivation.
enum RngStream : std::uint64_t {
  kStreamDataset = 1,
  kStreamInit = 2,
  kStreamEpoch = 3,
  kStreamValidation = 4,
  kStreamSpeech = 5,
};

}  // namespace avsep
