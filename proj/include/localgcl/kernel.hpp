#pragma once

#include "localgcl/common.hpp"
#include "localgcl/fwht.hpp"
#include "localgcl/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace localgcl {

/// Gaussian kernel exp(-|x-y|^2 / (2 tau)), bandwidth sqrt(tau).
inline double gaussian_kernel(const Eigen::Ref<const Vector>& x,
                              const Eigen::Ref<const Vector>& y, double tau) {
  require(tau > 0.0, "gaussian_kernel: tau must be positive");
  require(x.size() == y.size(), "gaussian_kernel: dimension mismatch");
  return std::exp(-(x - y).squaredNorm() / (2.0 * tau));
}

/// Random Fourier feature map for the Gaussian kernel.
///
/// Columns of `weights` are frequency vectors drawn i.i.d. from
/// N(0, (1/tau) I); psi(x) = [cos(W'x), sin(W'x)] / sqrt(D) satisfies
/// E[psi(x)'psi(y)] = exp(-|x-y|^2/(2 tau)). Sampling is column-major from
/// a seeded generator, so a map is fully reproducible from (dims, tau, seed).
class RffMap {
 public:
  RffMap(Index input_dim, Index num_features, double tau, std::uint64_t seed)
      : input_dim_(input_dim), num_features_(num_features), tau_(tau),
        seed_(seed) {
    require(input_dim >= 1, "rff_sample: input_dim must be >= 1");
    require(num_features >= 1, "rff_sample: num_features must be >= 1");
    require(tau > 0.0, "rff_sample: tau must be positive");
    weights_.resize(input_dim, num_features);
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(tau);
    for (Index j = 0; j < num_features; ++j)
      for (Index i = 0; i < input_dim; ++i)
        weights_(i, j) = scale * rng.gaussian();
  }

  Index input_dim() const { return input_dim_; }
  Index num_features() const { return num_features_; }
  double tau() const { return tau_; }
  std::uint64_t seed() const { return seed_; }
  const Matrix& weights() const { return weights_; }

  /// t = W'x, the pre-trigonometric projection.
  Vector project_pre(const Eigen::Ref<const Vector>& x) const {
    require(x.size() == input_dim_, "rff_project: dimension mismatch");
    return weights_.transpose() * x;
  }

  /// Adjoint of project_pre: dx = W dt. Used by gradient chains.
  Vector adjoint(const Eigen::Ref<const Vector>& dt) const {
    return weights_ * dt;
  }

  /// Pre-trigonometric projections for all rows of z: returns z * W (n x D).
  Matrix project_pre_rows(const Eigen::Ref<const Matrix>& z) const {
    require(z.cols() == input_dim_, "rff_project: dimension mismatch");
    return z * weights_;
  }

 private:
  Index input_dim_;
  Index num_features_;
  double tau_;
  std::uint64_t seed_;
  Matrix weights_;
};

/// Structured orthogonal random feature map.
///
/// Each block applies (sqrt(d_pad)/sqrt(tau)) * H S1 H S2 H S3 where H is
/// the normalized Walsh-Hadamard matrix and the S_i are diagonal Rademacher
/// sign flips, evaluated with three fast transforms per block. Inputs with
/// non-power-of-two dimension are zero-padded to d_pad; when num_features
/// is not a multiple of d_pad the last block is truncated.
class SorfMap {
 public:
  SorfMap(Index input_dim, Index num_features, double tau, std::uint64_t seed)
      : input_dim_(input_dim), num_features_(num_features), tau_(tau),
        seed_(seed) {
    require(input_dim >= 1, "sorf_build: input_dim must be >= 1");
    require(num_features >= 1, "sorf_build: num_features must be >= 1");
    require(tau > 0.0, "sorf_build: tau must be positive");
    d_pad_ = next_power_of_two(input_dim);
    block_count_ = (num_features + d_pad_ - 1) / d_pad_;
    scale_ = std::sqrt(static_cast<double>(d_pad_)) / std::sqrt(tau);
    Rng rng(seed);
    signs_.resize(static_cast<size_t>(block_count_));
    for (auto& block : signs_)
      for (auto& s : block) {
        s.resize(d_pad_);
        for (Index i = 0; i < d_pad_; ++i) s[i] = rng.rademacher();
      }
  }

  Index input_dim() const { return input_dim_; }
  Index num_features() const { return num_features_; }
  Index padded_dim() const { return d_pad_; }
  Index block_count() const { return block_count_; }
  double tau() const { return tau_; }
  std::uint64_t seed() const { return seed_; }
  /// Sign vectors of one block, outermost first (S1, S2, S3).
  const std::array<Vector, 3>& block_signs(Index b) const {
    return signs_[static_cast<size_t>(b)];
  }

  Vector project_pre(const Eigen::Ref<const Vector>& x) const {
    require(x.size() == input_dim_, "sorf_project: dimension mismatch");
    Vector t(num_features_);
    Vector buf(d_pad_);
    for (Index b = 0; b < block_count_; ++b) {
      buf.setZero();
      buf.head(input_dim_) = x;
      apply_block(b, buf);
      const Index lo = b * d_pad_;
      const Index len = std::min(d_pad_, num_features_ - lo);
      t.segment(lo, len) = buf.head(len);
    }
    return t;
  }

  Vector adjoint(const Eigen::Ref<const Vector>& dt) const {
    Vector dx = Vector::Zero(input_dim_);
    Vector buf(d_pad_);
    for (Index b = 0; b < block_count_; ++b) {
      const Index lo = b * d_pad_;
      const Index len = std::min(d_pad_, num_features_ - lo);
      buf.setZero();
      buf.head(len) = dt.segment(lo, len);
      apply_block_adjoint(b, buf);
      dx += buf.head(input_dim_);
    }
    return dx;
  }

  Matrix project_pre_rows(const Eigen::Ref<const Matrix>& z) const {
    require(z.cols() == input_dim_, "sorf_project: dimension mismatch");
    Matrix t(z.rows(), num_features_);
    Vector buf(d_pad_);
    for (Index r = 0; r < z.rows(); ++r) {
      for (Index b = 0; b < block_count_; ++b) {
        buf.setZero();
        buf.head(input_dim_) = z.row(r);
        apply_block(b, buf);
        const Index lo = b * d_pad_;
        const Index len = std::min(d_pad_, num_features_ - lo);
        t.row(r).segment(lo, len) = buf.head(len);
      }
    }
    return t;
  }

 private:
  // buf <- scale * H S1 H S2 H S3 buf
  void apply_block(Index b, Vector& buf) const {
    const auto& s = signs_[static_cast<size_t>(b)];
    std::span<double> view(buf.data(), static_cast<size_t>(d_pad_));
    buf.array() *= s[2].array();
    fwht_inplace(view);
    buf.array() *= s[1].array();
    fwht_inplace(view);
    buf.array() *= s[0].array();
    fwht_inplace(view);
    buf *= scale_;
  }

  // buf <- scale * S3 H S2 H S1 H buf  (transpose of apply_block)
  void apply_block_adjoint(Index b, Vector& buf) const {
    const auto& s = signs_[static_cast<size_t>(b)];
    std::span<double> view(buf.data(), static_cast<size_t>(d_pad_));
    fwht_inplace(view);
    buf.array() *= s[0].array();
    fwht_inplace(view);
    buf.array() *= s[1].array();
    fwht_inplace(view);
    buf.array() *= s[2].array();
    buf *= scale_;
  }

  Index input_dim_;
  Index num_features_;
  double tau_;
  std::uint64_t seed_;
  Index d_pad_ = 0;
  Index block_count_ = 0;
  double scale_ = 0.0;
  std::vector<std::array<Vector, 3>> signs_;
};

inline RffMap rff_sample(Index input_dim, Index num_features, double tau,
                         std::uint64_t seed) {
  return RffMap(input_dim, num_features, tau, seed);
}

inline SorfMap sorf_build(Index input_dim, Index num_features, double tau,
                          std::uint64_t seed) {
  return SorfMap(input_dim, num_features, tau, seed);
}

/// psi(x) = [cos t, sin t] / sqrt(D) for t = project_pre(x). |psi(x)| = 1
/// identically by cos^2 + sin^2.
template <class MapT>
Vector feature_project(const MapT& map, const Eigen::Ref<const Vector>& x) {
  const Index d = map.num_features();
  const Vector t = map.project_pre(x);
  Vector psi(2 * d);
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  psi.head(d) = t.array().cos() * inv;
  psi.tail(d) = t.array().sin() * inv;
  return psi;
}

/// Row-wise feature projection: returns [cos T, sin T]/sqrt(D), n x 2D.
template <class MapT>
Matrix feature_project_rows(const MapT& map,
                            const Eigen::Ref<const Matrix>& z) {
  const Index d = map.num_features();
  const Matrix t = map.project_pre_rows(z);
  Matrix psi(z.rows(), 2 * d);
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  psi.leftCols(d) = t.array().cos() * inv;
  psi.rightCols(d) = t.array().sin() * inv;
  return psi;
}

/// Randomized estimate psi(x)'psi(y) of the Gaussian kernel.
template <class MapT>
double approx_kernel(const MapT& map, const Eigen::Ref<const Vector>& x,
                     const Eigen::Ref<const Vector>& y) {
  return feature_project(map, x).dot(feature_project(map, y));
}

/// Variance of the D-feature RFF kernel estimate at scaled distance
/// z = |x - y| / sqrt(tau): (1 - e^{-z^2})^2 / (2 D).
inline double rff_variance(double z, Index num_features) {
  require(z >= 0.0, "rff_variance: z must be nonnegative");
  require(num_features >= 1, "rff_variance: num_features must be >= 1");
  const double c = 1.0 - std::exp(-z * z);
  return c * c / (2.0 * static_cast<double>(num_features));
}

}  // namespace localgcl
