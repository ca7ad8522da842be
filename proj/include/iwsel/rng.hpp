// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace iwsel {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic stream key from a base seed and any number of indices.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix64(seed);
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

/// FNV-1a, used to fold scenario labels into stream keys.
inline std::uint64_t hash_label(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Circular complex Gaussian with E|z|^2 = variance.
class ComplexGaussian {
 public:
  explicit ComplexGaussian(double variance = 1.0) : normal_(0.0, std::sqrt(variance / 2.0)) {}

  std::complex<double> operator()(Rng& rng) {
    const double re = normal_(rng);
    const double im = normal_(rng);
    return {re, im};
  }

 private:
  std::normal_distribution<double> normal_;
};

}  // namespace iwsel
