#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace railvo {

/// SplitMix64 finalizer; a stateless mixing function for counter-based noise.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (mix64(b) + 0x632be59bd9b4e019ULL));
}

/// Uniform in [0, 1) with 53 random bits.
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * (1.0 / 9007199254740992.0);
}

/// Deterministic stream keyed by a 64-bit seed. Every draw is a pure function
/// of (seed, draw index), so results never depend on thread scheduling.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(mix64(seed)) {}

  std::uint64_t next() { return hash_combine(seed_, counter_++); }
  double uniform() { return to_unit(next()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gaussian() {
    // Box-Muller, one output per pair keeps the stream position predictable.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Standard normal sample addressed by a key, for per-pixel noise.
inline double gaussian_at(std::uint64_t key) {
  const double u1 = 1.0 - to_unit(mix64(key));
  const double u2 = to_unit(mix64(key ^ 0xd1b54a32d192ed03ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace railvo
