#pragma once

#include <cstdint>
#include <random>

#include "cyclepref/core/hash.hpp"

namespace cyclepref::core {

// Deterministic generator. mt19937_64 output is fixed by the standard and the
// real-valued draws below avoid std distributions, whose algorithms vary by
// standard library, so streams are identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}
  Rng(std::uint64_t seed, const Digest& salt) : engine_(mix(seed ^ mix(salt.prefix64()))) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n; }

  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cyclepref::core
