#pragma once

// Deterministic random-number utilities. Streams are derived from a master
// seed via counter-based mixing, so adding consumers never perturbs existing
// draws. Scalar samplers are built on the raw mt19937_64 output (which the
// standard pins down exactly) instead of std::*_distribution, whose output
// is implementation-defined.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace gpcal {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stateless seed split: each key is folded through a splitmix round.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t k1,
                                 std::uint64_t k2 = 0, std::uint64_t k3 = 0) {
  std::uint64_t h = splitmix64(master ^ 0x6a09e667f3bcc908ULL);
  h = splitmix64(h ^ k1);
  h = splitmix64(h ^ k2);
  h = splitmix64(h ^ k3);
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t u64() { return engine_(); }

  // Uniform on [0, 1): 53 random mantissa bits.
  double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection to remove modulo bias.
    std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= lim);
    return v % n;
  }

  // Standard normal via Box-Muller (second value cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 boosted through
  // Gamma(a) = Gamma(a+1) * U^{1/a}.
  double gamma(double shape) {
    if (shape < 1.0) {
      double u;
      do {
        u = uniform();
      } while (u <= 0.0);
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      double v = t * t * t;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v;
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stream roles used by the experiment harness.
namespace role {
inline constexpr std::uint64_t design = 1;
inline constexpr std::uint64_t test = 2;
inline constexpr std::uint64_t fit = 3;
inline constexpr std::uint64_t tau = 4;
inline constexpr std::uint64_t mcmc = 5;
inline constexpr std::uint64_t pit = 6;
inline constexpr std::uint64_t rule2 = 7;
}  // namespace role

}  // namespace gpcal
