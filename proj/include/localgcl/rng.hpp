#pragma once

#include "localgcl/common.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace localgcl {

/// splitmix64 mixing step. Used to derive independent sub-seeds from
/// (seed, index) pairs so Monte Carlo trials are order- and
/// scheduling-independent.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index + 1));
}

/// Deterministic random source.
///
/// Engine is std::mt19937_64 (fully specified by the C++ standard, so the
/// raw 64-bit stream is identical across platforms for a given seed).
/// Floating-point draws are built on top of it explicitly -- uniform via a
/// 53-bit mantissa scale, Gaussian via Box-Muller -- instead of the
/// implementation-defined std::*_distribution adapters.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  /// Standard normal via Box-Muller. Draws are generated in pairs and the
  /// spare is cached, so consumption order is still deterministic.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u = uniform_pos();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double a = 2.0 * std::numbers::pi * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// +1 or -1 with equal probability.
  double rademacher() { return (engine_() & 1ULL) ? 1.0 : -1.0; }

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = ~0ULL - (~0ULL % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  Vector gaussian_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = gaussian();
    return v;
  }

  /// Uniform point on the unit sphere in R^n.
  Vector unit_vector(Index n) {
    Vector v = gaussian_vector(n);
    double norm = v.norm();
    while (norm == 0.0) {  // astronomically unlikely; regenerate
      v = gaussian_vector(n);
      norm = v.norm();
    }
    return v / norm;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace localgcl
