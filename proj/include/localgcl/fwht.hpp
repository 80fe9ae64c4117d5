#pragma once

#include "localgcl/common.hpp"

#include <cmath>
#include <span>

namespace localgcl {

/// In-place fast Walsh-Hadamard transform of a power-of-two-length buffer.
/// O(n log n) butterflies. With normalized=true the result is (H/sqrt(n))*v,
/// which is orthonormal and its own inverse.
inline void fwht_inplace(std::span<double> v, bool normalized = true) {
  const Index n = static_cast<Index>(v.size());
  require(is_power_of_two(n), "fwht: length must be a power of two");
  for (Index h = 1; h < n; h <<= 1) {
    for (Index i = 0; i < n; i += h << 1) {
      for (Index j = i; j < i + h; ++j) {
        const double a = v[j];
        const double b = v[j + h];
        v[j] = a + b;
        v[j + h] = a - b;
      }
    }
  }
  if (normalized) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (double& x : v) x *= scale;
  }
}

inline Vector fwht(const Vector& v, bool normalized = true) {
  Vector out = v;
  fwht_inplace(std::span<double>(out.data(), static_cast<size_t>(out.size())),
               normalized);
  return out;
}

}  // namespace localgcl
