#pragma once

#include "localgcl/kernel.hpp"
#include "localgcl/rng.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace localgcl {

// Monte Carlo checkers for the statistical guarantees of the random-feature
// kernel estimate. Every trial derives its own sub-seed from (seed, trial),
// so results do not depend on evaluation order.

/// Tail bound checked: |psi(x)'psi(y) - k(x,y)| stays below
/// (1 - exp(-4/tau)) / sqrt(2 D eps) except with probability <= eps,
/// for unit-norm inputs. The bound follows from the estimator variance via
/// Chebyshev, using |x - y|^2 <= 4 on the sphere.
struct TailBoundReport {
  double tau = 0.0;
  Index num_features = 0;
  double epsilon = 0.0;
  Index trials = 0;
  Index input_dim = 0;
  std::uint64_t seed = 0;
  double bound = 0.0;
  double violation_rate = 0.0;
  double mean_abs_error = 0.0;
  bool pass = false;
};

inline double kernel_tail_bound(double tau, Index num_features,
                                double epsilon) {
  return (1.0 - std::exp(-4.0 / tau)) /
         std::sqrt(2.0 * static_cast<double>(num_features) * epsilon);
}

inline TailBoundReport check_kernel_tail_bound(double tau, Index num_features,
                                               double epsilon, Index trials,
                                               std::uint64_t seed,
                                               Index input_dim = 8) {
  require(epsilon > 0.0 && epsilon < 1.0,
          "check_kernel_tail_bound: epsilon must be in (0,1)");
  require(trials >= 1000, "check_kernel_tail_bound: need >= 1000 trials");
  TailBoundReport rep;
  rep.tau = tau;
  rep.num_features = num_features;
  rep.epsilon = epsilon;
  rep.trials = trials;
  rep.input_dim = input_dim;
  rep.seed = seed;
  rep.bound = kernel_tail_bound(tau, num_features, epsilon);

  Index violations = 0;
  double abs_sum = 0.0;
  for (Index t = 0; t < trials; ++t) {
    const std::uint64_t sub = derive_seed(seed, static_cast<std::uint64_t>(t));
    Rng rng(sub);
    const Vector x = rng.unit_vector(input_dim);
    const Vector y = rng.unit_vector(input_dim);
    const RffMap map(input_dim, num_features, tau, derive_seed(sub, 1));
    const double delta =
        std::abs(approx_kernel(map, x, y) - gaussian_kernel(x, y, tau));
    abs_sum += delta;
    if (delta >= rep.bound) ++violations;
  }
  rep.violation_rate =
      static_cast<double>(violations) / static_cast<double>(trials);
  rep.mean_abs_error = abs_sum / static_cast<double>(trials);
  rep.pass = rep.violation_rate <= epsilon;
  return rep;
}

/// Unbiasedness checked: for fixed unit-norm pairs, the mean of psi'psi over
/// independent maps matches the exact Gaussian kernel within
/// `z_threshold` standard errors.
struct UnbiasednessReport {
  double tau = 0.0;
  Index num_features = 0;
  Index num_pairs = 0;
  Index maps_per_pair = 0;
  std::uint64_t seed = 0;
  double max_abs_z = 0.0;
  double mean_abs_error = 0.0;
  bool pass = false;
};

inline UnbiasednessReport check_rff_unbiasedness(double tau,
                                                 Index num_features,
                                                 Index num_pairs,
                                                 Index maps_per_pair,
                                                 std::uint64_t seed,
                                                 Index input_dim = 8,
                                                 double z_threshold = 3.0) {
  UnbiasednessReport rep;
  rep.tau = tau;
  rep.num_features = num_features;
  rep.num_pairs = num_pairs;
  rep.maps_per_pair = maps_per_pair;
  rep.seed = seed;

  Rng pair_rng(derive_seed(seed, 0));
  for (Index p = 0; p < num_pairs; ++p) {
    const Vector x = pair_rng.unit_vector(input_dim);
    const Vector y = pair_rng.unit_vector(input_dim);
    const double exact = gaussian_kernel(x, y, tau);
    double sum = 0.0, sum_sq = 0.0;
    for (Index m = 0; m < maps_per_pair; ++m) {
      const RffMap map(
          input_dim, num_features, tau,
          derive_seed(seed, 1 + static_cast<std::uint64_t>(p) * 1000003ULL +
                                static_cast<std::uint64_t>(m)));
      const double est = approx_kernel(map, x, y);
      sum += est;
      sum_sq += est * est;
    }
    const double n = static_cast<double>(maps_per_pair);
    const double mean = sum / n;
    const double var = (sum_sq - n * mean * mean) / (n - 1.0);
    const double se = std::sqrt(std::max(var, 1e-300) / n);
    const double zscore = std::abs(mean - exact) / se;
    rep.max_abs_z = std::max(rep.max_abs_z, zscore);
    rep.mean_abs_error += std::abs(mean - exact) / static_cast<double>(num_pairs);
  }
  rep.pass = rep.max_abs_z <= z_threshold;
  return rep;
}

/// Variance formula checked: the empirical variance of psi'psi over fresh
/// maps matches (1 - e^{-z^2})^2 / (2D) within rel_tol, for unit-norm pairs
/// at scaled distance z (realized with tau = 1 and |x - y| = z).
struct VarianceReport {
  double z = 0.0;
  Index num_features = 0;
  Index trials = 0;
  std::uint64_t seed = 0;
  double empirical_variance = 0.0;
  double predicted_variance = 0.0;
  double rel_error = 0.0;
  bool pass = false;
};

inline VarianceReport check_rff_variance(double z, Index num_features,
                                         Index trials, std::uint64_t seed,
                                         double rel_tol = 0.15) {
  require(z >= 0.0 && z <= 2.0,
          "check_rff_variance: need z in [0,2] for unit-norm inputs");
  VarianceReport rep;
  rep.z = z;
  rep.num_features = num_features;
  rep.trials = trials;
  rep.seed = seed;
  rep.predicted_variance = rff_variance(z, num_features);

  // Unit vectors in the plane at distance exactly z.
  const double c = 1.0 - z * z / 2.0;
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  Vector x(2), y(2);
  x << 1.0, 0.0;
  y << c, s;
  const double tau = 1.0;

  double sum = 0.0, sum_sq = 0.0;
  for (Index t = 0; t < trials; ++t) {
    const RffMap map(2, num_features, tau,
                     derive_seed(seed, static_cast<std::uint64_t>(t)));
    const double est = approx_kernel(map, x, y);
    sum += est;
    sum_sq += est * est;
  }
  const double n = static_cast<double>(trials);
  const double mean = sum / n;
  rep.empirical_variance = (sum_sq - n * mean * mean) / (n - 1.0);
  rep.rel_error = rep.predicted_variance > 0.0
                      ? std::abs(rep.empirical_variance -
                                 rep.predicted_variance) /
                            rep.predicted_variance
                      : rep.empirical_variance;
  rep.pass = rep.rel_error <= rel_tol;
  return rep;
}

}  // namespace localgcl
