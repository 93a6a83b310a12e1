#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "dsse/common.hpp"

namespace dsse {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Named substream derivation: all randomness in the pipeline flows from one
/// root seed through (name, index) substreams so stages stay independent and
/// reruns are reproducible.
inline uint64_t derive_seed(uint64_t root, std::string_view stream, uint64_t index = 0) {
  uint64_t s = root ^ fnv1a64(stream);
  uint64_t a = splitmix64(s);
  s ^= index * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL;
  uint64_t b = splitmix64(s);
  return a ^ (b + 0x9e3779b97f4a7c15ULL);
}

/// Deterministic generator with explicitly-specified distributions (the
/// std:: distribution objects are implementation-defined, so we roll the
/// transforms by hand to keep streams stable).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return double(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (no cached spare, keeps streams simple).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  /// Truncated normal by rejection; never emits values outside [lo, hi].
  double truncated_normal(double mean, double std, double lo, double hi) {
    if (std <= 0.0) return std::min(std::max(mean, lo), hi);
    for (int i = 0; i < 100000; ++i) {
      double x = normal(mean, std);
      if (x >= lo && x <= hi) return x;
    }
    throw NumericalError(NumericalError::Kind::NonConvergence,
                         "truncated normal rejection failed (bounds too tight)");
  }

  /// Index in [0, n) by weights (sum need not be 1).
  int pick_weighted(const double* w, int n) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += w[i];
    double u = uniform01() * total;
    for (int i = 0; i < n; ++i) {
      u -= w[i];
      if (u < 0.0) return i;
    }
    return n - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace dsse
