#pragma once

#include "localgcl/common.hpp"
#include "localgcl/graph.hpp"
#include "localgcl/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace localgcl {

// Contrastive objective over node embeddings: neighbors are positives, the
// whole graph is the negative pool. The positive term is exact and sparse;
// the negative term comes in an exact O(|V|^2 d) form, an exclude-neighbors
// form, and a random-feature surrogate that runs in O(|V| D).

enum class PositiveVariant { kMean, kMax, kWeight };
enum class NegativeMode { kExact, kApprox, kExcludeNeighbors };

struct EmbeddingMatrix {
  Matrix values;           // |V| x d
  bool normalized = false; // rows unit-norm when true
};

struct LossConfig {
  double tau = 0.5;
  PositiveVariant variant = PositiveVariant::kMean;
  NegativeMode negatives = NegativeMode::kExact;
  // Approx path: floor applied to psi'S before the log, to keep rare
  // non-positive randomized estimates from poisoning the loss.
  double clamp_floor = 1e-9;
  // Approx path: add 1/tau so the surrogate is on the same scale as the
  // exact negative term (exp(z'z/tau) = e^{1/tau} * kernel on the sphere).
  bool include_constant = true;

  void validate() const {
    require(tau > 0.0, "LossConfig: tau must be positive");
    require(clamp_floor > 0.0 && clamp_floor <= 1e-3,
            "LossConfig: clamp_floor must be in (0, 1e-3]");
  }
};

struct LossValue {
  double total = 0.0;
  Vector per_node;
  std::optional<Matrix> gradient;  // w.r.t. pre-normalization embeddings
  Index clamp_count = 0;           // approx: nodes hitting clamp_floor
  Index full_neighborhood_count = 0;  // exclude: nodes whose only negative
                                      // is themselves (result 1/tau)

  void finalize_total() {
    total = per_node.size() > 0 ? per_node.mean() : 0.0;
  }
};

namespace detail {

inline void check_normalized_input(const EmbeddingMatrix& z,
                                   const char* where) {
  require(z.normalized, std::string(where) + ": embeddings not normalized");
  for (Index i = 0; i < z.values.rows(); ++i) {
    require(std::abs(z.values.row(i).norm() - 1.0) <= 1e-6,
            std::string(where) + ": row " + std::to_string(i) +
                " is not unit-norm");
  }
}

inline void check_degrees(const Graph& g, const char* where) {
  for (Index i = 0; i < g.num_nodes; ++i)
    require(g.degree(i) >= 1,
            std::string(where) + ": node " + std::to_string(i) +
                " has degree 0");
}

inline void check_shapes(const EmbeddingMatrix& z, const Graph& g,
                         const char* where) {
  require(z.values.rows() == g.num_nodes,
          std::string(where) + ": embedding row count != num_nodes");
}

/// Row-normalizes a matrix; returns the norms for gradient chains.
inline std::pair<Matrix, Vector> row_normalize(const Matrix& e) {
  Matrix z(e.rows(), e.cols());
  Vector norms(e.rows());
  for (Index i = 0; i < e.rows(); ++i) {
    const double n = e.row(i).norm();
    require(n > 0.0, "row_normalize: zero row " + std::to_string(i));
    norms[i] = n;
    z.row(i) = e.row(i) / n;
  }
  return {std::move(z), std::move(norms)};
}

}  // namespace detail

/// Mean-of-neighbors positive term:
/// per node i, -log( sum_{j in N(i)} exp(z_i'z_j / tau) / |N(i)| ).
inline LossValue positive_loss(const EmbeddingMatrix& z, const Graph& g,
                               const LossConfig& cfg) {
  cfg.validate();
  detail::check_shapes(z, g, "positive_loss");
  detail::check_normalized_input(z, "positive_loss");
  detail::check_degrees(g, "positive_loss");
  const Matrix& zm = z.values;
  LossValue out;
  out.per_node.resize(g.num_nodes);
  for (Index i = 0; i < g.num_nodes; ++i) {
    const auto nb = g.neighbors(i);
    double m = -std::numeric_limits<double>::infinity();
    for (Index j : nb) m = std::max(m, zm.row(i).dot(zm.row(j)) / cfg.tau);
    double sum = 0.0;
    for (Index j : nb)
      sum += std::exp(zm.row(i).dot(zm.row(j)) / cfg.tau - m);
    out.per_node[i] =
        -(m + std::log(sum / static_cast<double>(nb.size())));
  }
  out.finalize_total();
  return out;
}

/// Nearest-neighbor positive term: per node i, -z_i's_i / tau with s_i the
/// neighbor of maximum cosine similarity (first index wins ties).
inline LossValue positive_loss_max(const EmbeddingMatrix& z, const Graph& g,
                                   const LossConfig& cfg) {
  cfg.validate();
  detail::check_shapes(z, g, "positive_loss_max");
  detail::check_normalized_input(z, "positive_loss_max");
  detail::check_degrees(g, "positive_loss_max");
  const Matrix& zm = z.values;
  LossValue out;
  out.per_node.resize(g.num_nodes);
  for (Index i = 0; i < g.num_nodes; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Index j : g.neighbors(i)) {
      const double sim = zm.row(i).dot(zm.row(j));
      if (sim > best) best = sim;
    }
    out.per_node[i] = -best / cfg.tau;
  }
  out.finalize_total();
  return out;
}

/// Indices selected by the max variant; exposed for verification.
inline std::vector<Index> max_positive_indices(const EmbeddingMatrix& z,
                                               const Graph& g) {
  std::vector<Index> sel(static_cast<size_t>(g.num_nodes));
  for (Index i = 0; i < g.num_nodes; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    Index arg = -1;
    for (Index j : g.neighbors(i)) {
      const double sim = z.values.row(i).dot(z.values.row(j));
      if (sim > best) {
        best = sim;
        arg = j;
      }
    }
    sel[static_cast<size_t>(i)] = arg;
  }
  return sel;
}

/// Similarity-reweighted positive term: neighbor weights are a softmax of
/// cosine similarities, then per node i,
/// -log( sum_j w_i(j) exp(z_i'z_j / tau) / |N(i)| ).
inline LossValue positive_loss_weight(const EmbeddingMatrix& z, const Graph& g,
                                      const LossConfig& cfg) {
  cfg.validate();
  detail::check_shapes(z, g, "positive_loss_weight");
  detail::check_normalized_input(z, "positive_loss_weight");
  detail::check_degrees(g, "positive_loss_weight");
  const Matrix& zm = z.values;
  LossValue out;
  out.per_node.resize(g.num_nodes);
  for (Index i = 0; i < g.num_nodes; ++i) {
    const auto nb = g.neighbors(i);
    double cmax = -std::numeric_limits<double>::infinity();
    for (Index j : nb) cmax = std::max(cmax, zm.row(i).dot(zm.row(j)));
    double wsum = 0.0, acc = 0.0;
    for (Index j : nb) {
      const double c = zm.row(i).dot(zm.row(j));
      const double w = std::exp(c - cmax);
      wsum += w;
      acc += w * std::exp(c / cfg.tau - cmax / cfg.tau);
    }
    // acc/wsum = sum_j softmax_j * exp(c_j/tau - cmax/tau)
    out.per_node[i] = -(cmax / cfg.tau +
                        std::log(acc / wsum / static_cast<double>(nb.size())));
  }
  out.finalize_total();
  return out;
}

/// Exact negative term: per node i, log sum_{k in V} exp(z_i'z_k / tau),
/// self and neighbors included. Row blocks keep memory at O(block |V|)
/// while the work stays O(|V|^2 d); log-sum-exp with max subtraction.
inline LossValue negative_loss_exact(const EmbeddingMatrix& z,
                                     const LossConfig& cfg,
                                     Index block_rows = 256) {
  cfg.validate();
  detail::check_normalized_input(z, "negative_loss_exact");
  const Matrix& zm = z.values;
  const Index n = zm.rows();
  LossValue out;
  out.per_node.resize(n);
  for (Index lo = 0; lo < n; lo += block_rows) {
    const Index len = std::min(block_rows, n - lo);
    const Matrix scores = (zm.middleRows(lo, len) * zm.transpose()) / cfg.tau;
    for (Index r = 0; r < len; ++r) {
      const double m = scores.row(r).maxCoeff();
      out.per_node[lo + r] =
          m + std::log((scores.row(r).array() - m).exp().sum());
    }
  }
  out.finalize_total();
  return out;
}

/// Exclude-neighbors negative term: per node i,
/// log( sum_{k in V} exp(z_i'z_k/tau) - sum_{j in N(i)} exp(z_i'z_j/tau) ).
/// The self term stays in the sum. When the subtraction cancels more than
/// 99.99% of the total, the remainder is re-accumulated directly over
/// non-neighbors. A node adjacent to everything keeps only itself and
/// yields exactly 1/tau; such nodes are counted in the result.
inline LossValue negative_loss_exclude_neighbors(const EmbeddingMatrix& z,
                                                 const Graph& g,
                                                 const LossConfig& cfg,
                                                 Index block_rows = 256) {
  cfg.validate();
  detail::check_shapes(z, g, "negative_loss_exclude_neighbors");
  detail::check_normalized_input(z, "negative_loss_exclude_neighbors");
  const Matrix& zm = z.values;
  const Index n = zm.rows();
  LossValue out;
  out.per_node.resize(n);
  for (Index lo = 0; lo < n; lo += block_rows) {
    const Index len = std::min(block_rows, n - lo);
    const Matrix scores = (zm.middleRows(lo, len) * zm.transpose()) / cfg.tau;
    for (Index r = 0; r < len; ++r) {
      const Index i = lo + r;
      const double m = scores.row(r).maxCoeff();
      const Eigen::ArrayXd ex = (scores.row(r).array() - m).exp();
      const double full = ex.sum();
      double nb_sum = 0.0;
      for (Index j : g.neighbors(i)) nb_sum += ex[j];
      double rem = full - nb_sum;
      if (rem <= 1e-4 * full) {
        // Cancellation-prone: accumulate the kept terms directly.
        rem = 0.0;
        const auto nb = g.neighbors(i);
        size_t p = 0;
        for (Index k = 0; k < n; ++k) {
          if (p < nb.size() && nb[p] == k) {
            ++p;
            continue;
          }
          rem += ex[k];
        }
      }
      if (g.degree(i) == n - 1) ++out.full_neighborhood_count;
      require(rem > 0.0,
              "negative_loss_exclude_neighbors: empty negative sum at node " +
                  std::to_string(i));
      out.per_node[i] = m + std::log(rem);
    }
  }
  out.finalize_total();
  return out;
}

/// Random-feature surrogate of the negative term: per node i,
/// log( max(psi(z_i)' S, clamp_floor) ) with S = sum_j psi(z_j), plus 1/tau
/// when include_constant is set. Two streaming passes, O(|V| D) time and
/// O(D) extra memory; clamped nodes are counted.
template <class MapT>
LossValue negative_loss_approx(const EmbeddingMatrix& z, const MapT& map,
                               const LossConfig& cfg) {
  cfg.validate();
  detail::check_normalized_input(z, "negative_loss_approx");
  require(map.tau() == cfg.tau,
          "negative_loss_approx: map tau differs from config tau");
  require(map.input_dim() == z.values.cols(),
          "negative_loss_approx: map input_dim != embedding dim");
  const Matrix& zm = z.values;
  const Index n = zm.rows();
  const Index d = map.num_features();
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  const double constant = cfg.include_constant ? 1.0 / cfg.tau : 0.0;

  Vector s = Vector::Zero(2 * d);
  Vector psi(2 * d);
  for (Index i = 0; i < n; ++i) {
    const Vector t = map.project_pre(zm.row(i));
    psi.head(d) = t.array().cos() * inv;
    psi.tail(d) = t.array().sin() * inv;
    s += psi;
  }
  LossValue out;
  out.per_node.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Vector t = map.project_pre(zm.row(i));
    psi.head(d) = t.array().cos() * inv;
    psi.tail(d) = t.array().sin() * inv;
    double v = psi.dot(s);
    if (v < cfg.clamp_floor) {
      v = cfg.clamp_floor;
      ++out.clamp_count;
    }
    out.per_node[i] = std::log(v) + constant;
  }
  out.finalize_total();
  return out;
}

namespace detail {

inline LossValue positive_term(const EmbeddingMatrix& z, const Graph& g,
                               const LossConfig& cfg) {
  switch (cfg.variant) {
    case PositiveVariant::kMax:
      return positive_loss_max(z, g, cfg);
    case PositiveVariant::kWeight:
      return positive_loss_weight(z, g, cfg);
    case PositiveVariant::kMean:
    default:
      return positive_loss(z, g, cfg);
  }
}

template <class MapT>
LossValue negative_term(const EmbeddingMatrix& z, const Graph& g,
                        const MapT* map, const LossConfig& cfg) {
  switch (cfg.negatives) {
    case NegativeMode::kApprox:
      require(map != nullptr, "local_gcl_loss: approx mode needs a map");
      return negative_loss_approx(z, *map, cfg);
    case NegativeMode::kExcludeNeighbors:
      return negative_loss_exclude_neighbors(z, g, cfg);
    case NegativeMode::kExact:
    default:
      return negative_loss_exact(z, cfg);
  }
}

}  // namespace detail

/// Combined objective: positive term + negative term, averaged over nodes.
/// `map` may be null unless cfg.negatives is kApprox.
template <class MapT = RffMap>
LossValue local_gcl_loss(const EmbeddingMatrix& z, const Graph& g,
                         const MapT* map, const LossConfig& cfg) {
  LossValue pos = detail::positive_term(z, g, cfg);
  const LossValue neg = detail::negative_term(z, g, map, cfg);
  pos.per_node += neg.per_node;
  pos.clamp_count = neg.clamp_count;
  pos.full_neighborhood_count = neg.full_neighborhood_count;
  pos.finalize_total();
  return pos;
}

inline LossValue local_gcl_loss(const EmbeddingMatrix& z, const Graph& g,
                                const LossConfig& cfg) {
  return local_gcl_loss<RffMap>(z, g, nullptr, cfg);
}

// ---------------------------------------------------------------------------
// Analytic gradients.
//
// The encoder emits unnormalized rows, so every gradient below is taken with
// respect to the pre-normalization matrix E; z_i = e_i/|e_i| and the chain
// through the normalization is (g - (g.z) z)/|e| per row.
// ---------------------------------------------------------------------------

namespace detail {

// d(total)/dZ of the positive term, scaled by 1/|V|.
inline Matrix positive_grad_z(const Matrix& zm, const Graph& g,
                              const LossConfig& cfg) {
  const Index n = zm.rows();
  const double invn = 1.0 / static_cast<double>(n);
  Matrix grad = Matrix::Zero(n, zm.cols());
  switch (cfg.variant) {
    case PositiveVariant::kMax: {
      for (Index i = 0; i < n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        Index arg = -1;
        for (Index j : g.neighbors(i)) {
          const double sim = zm.row(i).dot(zm.row(j));
          if (sim > best) {
            best = sim;
            arg = j;
          }
        }
        const double c = -invn / cfg.tau;
        grad.row(i) += c * zm.row(arg);
        grad.row(arg) += c * zm.row(i);
      }
      break;
    }
    case PositiveVariant::kWeight: {
      for (Index i = 0; i < n; ++i) {
        const auto nb = g.neighbors(i);
        const Index deg = static_cast<Index>(nb.size());
        Eigen::ArrayXd c(deg), w(deg), u(deg);
        for (Index p = 0; p < deg; ++p)
          c[p] = zm.row(i).dot(zm.row(nb[static_cast<size_t>(p)]));
        const double cmax = c.maxCoeff();
        w = (c - cmax).exp();
        w /= w.sum();
        u = w * ((c / cfg.tau) - (cmax / cfg.tau)).exp();
        const double usum = u.sum();
        const Eigen::ArrayXd r = u / usum;
        Eigen::RowVectorXd zbar = Eigen::RowVectorXd::Zero(zm.cols());
        Eigen::RowVectorXd rz = Eigen::RowVectorXd::Zero(zm.cols());
        for (Index p = 0; p < deg; ++p) {
          zbar += w[p] * zm.row(nb[static_cast<size_t>(p)]);
          rz += r[p] * zm.row(nb[static_cast<size_t>(p)]);
        }
        const double k = 1.0 + 1.0 / cfg.tau;
        grad.row(i) += -invn * (k * rz - zbar);
        for (Index p = 0; p < deg; ++p) {
          const Index j = nb[static_cast<size_t>(p)];
          grad.row(j) += -invn * (k * r[p] - w[p]) * zm.row(i);
        }
      }
      break;
    }
    case PositiveVariant::kMean:
    default: {
      for (Index i = 0; i < n; ++i) {
        const auto nb = g.neighbors(i);
        const Index deg = static_cast<Index>(nb.size());
        Eigen::ArrayXd sc(deg);
        for (Index p = 0; p < deg; ++p)
          sc[p] =
              zm.row(i).dot(zm.row(nb[static_cast<size_t>(p)])) / cfg.tau;
        const double m = sc.maxCoeff();
        Eigen::ArrayXd a = (sc - m).exp();
        a /= a.sum();
        const double co = -invn / cfg.tau;
        for (Index p = 0; p < deg; ++p) {
          const Index j = nb[static_cast<size_t>(p)];
          grad.row(i) += co * a[p] * zm.row(j);
          grad.row(j) += co * a[p] * zm.row(i);
        }
      }
      break;
    }
  }
  return grad;
}

// d(total)/dZ of the exact negative term: (1/(|V| tau)) (P + P') Z where
// P is the row-softmax of Z Z'/tau. The self-term's doubled derivative and
// the cross terms collapse to exactly this form. Blocked like the loss.
inline Matrix negative_exact_grad_z(const Matrix& zm, double tau,
                                    Index block_rows = 256) {
  const Index n = zm.rows();
  const double c = 1.0 / (static_cast<double>(n) * tau);
  Matrix grad = Matrix::Zero(n, zm.cols());
  for (Index lo = 0; lo < n; lo += block_rows) {
    const Index len = std::min(block_rows, n - lo);
    Matrix p = (zm.middleRows(lo, len) * zm.transpose()) / tau;
    for (Index r = 0; r < len; ++r) {
      const double m = p.row(r).maxCoeff();
      p.row(r) = (p.row(r).array() - m).exp();
      p.row(r) /= p.row(r).sum();
    }
    grad.middleRows(lo, len) += c * (p * zm);
    grad += c * (p.transpose() * zm.middleRows(lo, len));
  }
  return grad;
}

// Exclude-neighbors analogue: same collapse with the renormalized weights
// supported on non-neighbors (self included).
inline Matrix negative_exclude_grad_z(const Matrix& zm, const Graph& g,
                                      double tau, Index block_rows = 256) {
  const Index n = zm.rows();
  const double c = 1.0 / (static_cast<double>(n) * tau);
  Matrix grad = Matrix::Zero(n, zm.cols());
  for (Index lo = 0; lo < n; lo += block_rows) {
    const Index len = std::min(block_rows, n - lo);
    Matrix p = (zm.middleRows(lo, len) * zm.transpose()) / tau;
    for (Index r = 0; r < len; ++r) {
      const Index i = lo + r;
      const double m = p.row(r).maxCoeff();
      p.row(r) = (p.row(r).array() - m).exp();
      for (Index j : g.neighbors(i)) p(r, j) = 0.0;
      const double sum = p.row(r).sum();
      require(sum > 0.0, "negative_loss_exclude_neighbors: empty negative "
                         "sum at node " + std::to_string(i));
      p.row(r) /= sum;
    }
    grad.middleRows(lo, len) += c * (p * zm);
    grad += c * (p.transpose() * zm.middleRows(lo, len));
  }
  return grad;
}

// Approx negative gradient. Nodes whose estimate got clamped contribute a
// constant loss, so their weight is zero both directly and through S.
template <class MapT>
Matrix negative_approx_grad_z(const Matrix& zm, const MapT& map,
                              const LossConfig& cfg) {
  const Index n = zm.rows();
  const Index d = map.num_features();
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  const double invn = 1.0 / static_cast<double>(n);

  Matrix t = map.project_pre_rows(zm);  // n x D
  Matrix psi(n, 2 * d);
  psi.leftCols(d) = t.array().cos() * inv;
  psi.rightCols(d) = t.array().sin() * inv;
  const Vector s = psi.colwise().sum();

  Vector coeff(n);  // 1/(psi_i'S), or 0 when clamped
  for (Index i = 0; i < n; ++i) {
    const double v = psi.row(i).dot(s);
    coeff[i] = v < cfg.clamp_floor ? 0.0 : 1.0 / v;
  }
  const Vector t2 = psi.transpose() * coeff;  // sum_i psi_i / v_i

  Matrix grad(n, zm.cols());
  Vector dt(d);
  for (Index i = 0; i < n; ++i) {
    // d(total)/d psi_i = invn * (coeff_i * S + t2); chain through cos/sin.
    const Vector gpsi = invn * (coeff[i] * s + t2);
    dt = inv * (-t.row(i).array().sin().transpose() * gpsi.head(d).array() +
                t.row(i).array().cos().transpose() * gpsi.tail(d).array());
    grad.row(i) = map.adjoint(dt);
  }
  return grad;
}

}  // namespace detail

/// Loss and analytic gradient with respect to the pre-normalization
/// embeddings. Rows of `pre_norm` are normalized internally; the returned
/// gradient includes the chain through that normalization.
template <class MapT = RffMap>
LossValue loss_with_gradient(const Matrix& pre_norm, const Graph& g,
                             const MapT* map, const LossConfig& cfg) {
  cfg.validate();
  auto [zm, norms] = detail::row_normalize(pre_norm);
  EmbeddingMatrix z{zm, true};
  LossValue out = local_gcl_loss(z, g, map, cfg);

  Matrix grad_z = detail::positive_grad_z(zm, g, cfg);
  switch (cfg.negatives) {
    case NegativeMode::kApprox:
      grad_z += detail::negative_approx_grad_z(zm, *map, cfg);
      break;
    case NegativeMode::kExcludeNeighbors:
      grad_z += detail::negative_exclude_grad_z(zm, g, cfg.tau);
      break;
    case NegativeMode::kExact:
    default:
      grad_z += detail::negative_exact_grad_z(zm, cfg.tau);
      break;
  }
  Matrix grad(pre_norm.rows(), pre_norm.cols());
  for (Index i = 0; i < pre_norm.rows(); ++i) {
    const double gz = grad_z.row(i).dot(zm.row(i));
    grad.row(i) = (grad_z.row(i) - gz * zm.row(i)) / norms[i];
  }
  out.gradient = std::move(grad);
  return out;
}

/// Gradient-only convenience wrapper.
template <class MapT = RffMap>
Matrix loss_gradient(const Matrix& pre_norm, const Graph& g, const MapT* map,
                     const LossConfig& cfg) {
  return *loss_with_gradient(pre_norm, g, map, cfg).gradient;
}

inline Matrix loss_gradient(const Matrix& pre_norm, const Graph& g,
                            const LossConfig& cfg) {
  return loss_gradient<RffMap>(pre_norm, g, nullptr, cfg);
}

}  // namespace localgcl
