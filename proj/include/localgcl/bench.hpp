#pragma once

#include "localgcl/common.hpp"
#include "localgcl/kernel.hpp"
#include "localgcl/loss.hpp"
#include "localgcl/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace localgcl {

// Scaling measurement for the negative term: the exact path is O(|V|^2 d),
// the random-feature path O(|V| D). Each size gets a warm-up evaluation and
// the median of `reps` timed runs.

struct BenchPoint {
  Index size = 0;
  double exact_sec = 0.0;
  double approx_sec = 0.0;
};

struct BenchResult {
  std::vector<BenchPoint> points;
  std::optional<double> exact_slope;
  std::optional<double> approx_slope;
};

/// Least-squares slope of log(time) against log(size); nullopt with fewer
/// than two points.
inline std::optional<double> fit_loglog_slope(
    const std::vector<Index>& sizes, const std::vector<double>& times) {
  if (sizes.size() < 2 || sizes.size() != times.size()) return std::nullopt;
  const double n = static_cast<double>(sizes.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < sizes.size(); ++i) {
    const double x = std::log(static_cast<double>(sizes[i]));
    const double y = std::log(times[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace detail {

template <class F>
double median_time(F&& body, int reps) {
  using clock = std::chrono::steady_clock;
  body();  // warm-up
  std::vector<double> times;
  times.reserve(static_cast<size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    const auto t0 = clock::now();
    body();
    const auto t1 = clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

}  // namespace detail

inline BenchResult run_scaling_bench(const std::vector<Index>& sizes, Index d,
                                     Index proj_dim, double tau,
                                     std::uint64_t seed, int reps = 5) {
  for (size_t i = 1; i < sizes.size(); ++i)
    require(sizes[i] > sizes[i - 1], "bench: sizes must be ascending");
  LossConfig cfg;
  cfg.tau = tau;

  BenchResult res;
  volatile double sink = 0.0;  // keep the optimizer honest
  for (size_t s = 0; s < sizes.size(); ++s) {
    const Index n = sizes[s];
    Rng rng(derive_seed(seed, s));
    Matrix z(n, d);
    for (Index i = 0; i < n; ++i) z.row(i) = rng.unit_vector(d);
    const EmbeddingMatrix emb{z, true};
    const SorfMap map(d, proj_dim, tau, derive_seed(seed, 1000 + s));

    BenchPoint pt;
    pt.size = n;
    pt.exact_sec = detail::median_time(
        [&] { sink = negative_loss_exact(emb, cfg).total; }, reps);
    pt.approx_sec = detail::median_time(
        [&] { sink = negative_loss_approx(emb, map, cfg).total; }, reps);
    res.points.push_back(pt);
  }
  (void)sink;

  std::vector<double> exact_t, approx_t;
  for (const auto& p : res.points) {
    exact_t.push_back(p.exact_sec);
    approx_t.push_back(p.approx_sec);
  }
  res.exact_slope = fit_loglog_slope(sizes, exact_t);
  res.approx_slope = fit_loglog_slope(sizes, approx_t);
  return res;
}

}  // namespace localgcl
