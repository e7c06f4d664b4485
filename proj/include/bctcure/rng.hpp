#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bctcure {

// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Reproducible random stream. Stream `index` of master seed `seed` is an
/// mt19937_64 seeded with splitmix64(splitmix64(seed) ^ splitmix64(index + 1)),
/// so replication r, bootstrap resample b, or residual set s always sees the
/// same numbers regardless of worker count. Uniforms use the top 53 bits,
/// offset by half an ulp so they lie strictly inside (0, 1).
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t index)
      : engine_(splitmix64(splitmix64(seed) ^ splitmix64(index + 1))) {}

  double uniform() noexcept {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Exponential with the given rate (mean 1/rate).
  double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }
  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bctcure
