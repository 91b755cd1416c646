#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace agesir {

/// Deterministic pseudo-random stream identified by a 64-bit seed.
/// All variates are derived from the raw engine output through fixed
/// arithmetic, so a given seed reproduces the same stream on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1]; safe as a log argument.
  double uniform_pos() { return 1.0 - uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Exponential holding time; rate must be > 0.
  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  /// Uniform integer in [0, bound), bound >= 1. Rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return v % bound;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace agesir
