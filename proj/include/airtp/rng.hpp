#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

#include "airtp/error.hpp"

namespace airtp {

// Deterministic random stream. Gaussian variates are produced by an
// explicit Box-Muller transform on top of the raw 64-bit engine so the
// byte-for-byte output is independent of the standard library in use.
// One stream per worker; streams are never shared across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ULL : seed) {
    // warm up past low-entropy seeds
    next_u64();
    next_u64();
  }

  // Derives an independent stream from (seed, index), used by worker
  // pools so task results do not depend on scheduling order.
  static Rng derive(std::uint64_t seed, std::uint64_t index) {
    return Rng(mix(seed ^ mix(index + 0x632be59bd9b4e019ULL)));
  }

  std::uint64_t next_u64() {
    // xorshift* variant; period 2^64-1 on the nonzero orbit
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dULL;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  // Standard real normal N(0, 1).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Circularly-symmetric complex normal CN(mean, variance): real and
  // imaginary parts each carry variance/2.
  std::complex<double> complex_normal(std::complex<double> mean, double variance) {
    if (variance < 0.0) throw DomainError("complex_normal: negative variance");
    const double s = std::sqrt(variance / 2.0);
    return mean + std::complex<double>(s * normal(), s * normal());
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace airtp
