#pragma once

#include <cmath>
#include <cstdint>

namespace cqa {

// Small linear congruential generator used everywhere randomness is needed.
// The standard library distributions are not bit-stable across platforms;
// this keeps seeded runs reproducible.
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  uint64_t next() {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return state;
  }
  // uniform integer in [0, n)
  uint64_t below(uint64_t n) { return (next() >> 16) % n; }
  // uniform in [0, 1), float (24-bit) and double (53-bit) variants
  float uniform_float() {
    return static_cast<float>((next() >> 40) & 0xffffff) / 16777216.0f;
  }
  double uniform() {
    return static_cast<double>((next() >> 11) & ((1ull << 53) - 1)) /
           static_cast<double>(1ull << 53);
  }
  // standard normal via Box-Muller
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
};

}  // namespace cqa
