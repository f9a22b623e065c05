#pragma once

// Seeded random source. The engine is std::mt19937_64; all mappings from raw
// 64-bit draws to distributions are defined here rather than taken from
// std::*_distribution, so the stream of values for a given seed is fixed by
// this file alone.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace pmlgan {

// splitmix64 finalizer; used both for seed derivation and for mixing salts.
inline std::uint64_t mix_seed(std::uint64_t x, std::uint64_t salt) {
  std::uint64_t z = x + 0x9e3779b97f4a7c15ULL + salt;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Box-Muller without caching the second value.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) {
      u1 = uniform01();
    }
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform index in [0, n). Modulo bias is ~n/2^64 and irrelevant at the
  // sizes used here; determinism is what matters.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % n);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Knuth's method; lambda stays small (label counts) in this codebase.
  std::size_t poisson(double lambda) {
    if (lambda <= 0.0) {
      return 0;
    }
    const double limit = std::exp(-lambda);
    std::size_t k = 0;
    double prod = uniform01();
    while (prod > limit) {
      ++k;
      prod *= uniform01();
    }
    return k;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pmlgan
