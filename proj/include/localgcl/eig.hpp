#pragma once

#include "localgcl/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace localgcl {

/// Full eigendecomposition of a symmetric matrix: ascending eigenvalues,
/// orthonormal eigenvector columns paired with them.
struct SpectralDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;

  Matrix reconstruct() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }
};

/// Cyclic Jacobi eigensolver for dense symmetric matrices.
///
/// Sweeps rotate every off-diagonal pair in row order until the
/// off-diagonal Frobenius norm drops below 1e-12 (relative to the input
/// scale), capped at 100*n sweeps. Meant for verification-scale matrices
/// (n up to a few thousand); quadratic convergence makes the cap academic.
inline SpectralDecomposition eig_sym(const Matrix& m,
                                     double symmetry_tol = 1e-10) {
  const Index n = m.rows();
  require(n > 0 && m.cols() == n, "eig_sym: matrix must be square");
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= symmetry_tol,
          "eig_sym: matrix not symmetric within tolerance");

  Matrix a = (m + m.transpose()) / 2.0;  // exact symmetry for the rotations
  Matrix v = Matrix::Identity(n, n);

  const double scale = std::max(1.0, a.norm());
  const double target = 1e-12 * scale;
  const Index max_sweeps = 100 * n;

  auto off_norm = [&]() {
    double s = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) s += a(p, q) * a(p, q);
    return std::sqrt(2.0 * s);
  };

  bool converged = n == 1 || off_norm() <= target;
  for (Index sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Skip rotations that cannot move the result at this scale.
        if (std::abs(apq) < 1e-18 * scale) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_norm() <= target;
  }
  if (!converged)
    throw numeric_error("eig_sym: no convergence within sweep cap");

  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a(i, i) < a(j, j); });

  SpectralDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]);
    out.eigenvectors.col(k) = v.col(order[k]);
  }
  return out;
}

}  // namespace localgcl
