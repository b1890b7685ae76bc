#pragma once

#include <cmath>
#include <cstdint>

#include "qdarwin/core.hpp"

namespace qdarwin {

/// Deterministic stream generator (xoshiro256** seeded via splitmix64).
/// Identical seed and call sequence give identical outputs; std::random
/// distributions are avoided because their output is not pinned by the
/// standard.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : seed_(seed) {
    uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Index in [0, n).
  Index uniform_index(Index n) {
    return static_cast<Index>(next_u64() % static_cast<uint64_t>(n));
  }

  /// Standard normal via Box-Muller (consumes two uniforms per pair).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  cxd gaussian_complex() { return cxd(gaussian(), gaussian()); }

  cmat gaussian_matrix(Index rows, Index cols) {
    cmat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = gaussian_complex();
    return m;
  }

  /// Independent child stream; safe for handing to concurrent consumers.
  SeededRng split() {
    uint64_t child = seed_ ^ splitmix64_once(0x9e3779b97f4a7c15ULL + (++split_counter_));
    child ^= next_u64();
    return SeededRng(child);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static uint64_t splitmix64_once(uint64_t x) { return splitmix64(x); }

  uint64_t seed_;
  uint64_t state_[4] = {};
  uint64_t split_counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qdarwin
