#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace rtdlab {

// splitmix64 finalizer.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed of substream `index` under `master`. Substreams of one master are
// pairwise unrelated, so run j of a batch never depends on runs 0..j-1.
[[nodiscard]] constexpr std::uint64_t substream_seed(std::uint64_t master,
                                                     std::uint64_t index) noexcept {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n); multiply-shift reduction, bias below n / 2^64.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  bool coin() { return (engine_() >> 63) != 0; }

  // Standard normal via Box-Muller (one draw per call).
  double normal();

  // Poisson(1) by inverse transform.
  unsigned poisson1();

 private:
  std::mt19937_64 engine_;
};

inline double Rng::normal() {
  constexpr double two_pi = 6.283185307179586476925;
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline unsigned Rng::poisson1() {
  const double u = uniform();
  double p = 0.36787944117144233;  // e^-1
  double cdf = p;
  unsigned k = 0;
  while (u >= cdf && k < 64) {
    ++k;
    p /= k;
    cdf += p;
  }
  return k;
}

}  // namespace rtdlab
