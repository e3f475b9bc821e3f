#pragma once

#include <cstdint>

namespace evrf {

// splitmix64 step; also used as the seed-mixing primitive.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Small deterministic RNG. Every randomized operation takes an explicit
/// seed derived from the run's root seed, so results are independent of
/// thread count and call interleaving.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() { return splitmix64(state); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [a, b).
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }
};

// Named sub-streams hanging off one root seed, so ablations can perturb one
// source of randomness without disturbing the others.
enum class SeedStream : std::uint64_t {
  WindowSampler = 1,
  PixelJitter = 2,
  NegativeSampling = 3,
  NoiseEvents = 4,
  DepthSamples = 5,
  WindowPermutation = 6,
  EvalRender = 7,
  BatchSubsample = 8,
};

inline std::uint64_t derive_seed(std::uint64_t root, SeedStream stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = root;
  splitmix64(s);
  s ^= static_cast<std::uint64_t>(stream) * 0xD6E8FEB86659FD93ull;
  splitmix64(s);
  s ^= a * 0xA0761D6478BD642Full;
  splitmix64(s);
  s ^= b * 0xE7037ED1A0B428DBull;
  std::uint64_t copy = s;
  return splitmix64(copy);
}

} // namespace evrf
