#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace biloc {

// splitmix64-based generator with hand-rolled samplers. We do not use the
// <random> distributions because their output is implementation-defined;
// every stream here must be bit-identical for a given (seed, label).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Independent substream keyed by (seed, label). Labels are FNV-1a hashed.
  static Rng substream(std::uint64_t seed, std::string_view label) {
    std::uint64_t h = 1469598103934665603ull;
    for (char ch : label) {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ull;
    }
    Rng r(seed ^ h);
    r.next();
    r.next();
    return r;
  }

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t below(std::uint64_t n) { return next() % n; }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  // Box-Muller, one value per call (no caching so substream state stays
  // a single word).
  double normal(double sigma = 1.0) {
    double u1 = uniform_pos();
    double u2 = uniform();
    return sigma * std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Gap (>= 1) to the next success in a Bernoulli(p) pulse train.
  std::uint64_t geometric_gap(double p) {
    if (p >= 1.0) return 1;
    double g = std::floor(std::log(uniform_pos()) / std::log1p(-p));
    if (g < 0) g = 0;
    return static_cast<std::uint64_t>(g) + 1;
  }

  // Index sampled from an unnormalized weight table.
  int pick(const double* w, int n) {
    double total = 0;
    for (int i = 0; i < n; ++i) total += w[i];
    double u = uniform() * total;
    for (int i = 0; i < n - 1; ++i) {
      u -= w[i];
      if (u < 0) return i;
    }
    return n - 1;
  }

 private:
  std::uint64_t state_;
};

}  // namespace biloc
