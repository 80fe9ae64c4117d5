#pragma once

#include "localgcl/common.hpp"
#include "localgcl/eig.hpp"
#include "localgcl/graph.hpp"
#include "localgcl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace localgcl {

/// Closed-form optimum of the factorization view of the objective:
/// columns are the top-d eigenvectors of the normalized adjacency scaled by
/// sqrt(eigenvalue), ordered by descending eigenvalue. Signs are fixed so
/// the first entry above 1e-12 in magnitude is positive, making the result
/// reproducible across eigensolvers.
inline Matrix spectral_embeddings(const Graph& g, Index d) {
  require(d >= 1 && d <= g.num_nodes,
          "spectral_embeddings: need 1 <= d <= num_nodes");
  const SpectralDecomposition eig = eig_sym(normalized_adjacency(g));
  const Index n = g.num_nodes;
  Matrix out(n, d);
  for (Index k = 0; k < d; ++k) {
    const Index src = n - 1 - k;  // descending order
    const double lambda = eig.eigenvalues[src];
    if (lambda < -1e-9)
      throw invalid_input(
          "spectral_embeddings: selected eigenvalue " + std::to_string(k) +
          " is negative; sqrt undefined");
    Vector v = eig.eigenvectors.col(src);
    for (Index i = 0; i < n; ++i) {
      if (std::abs(v[i]) > 1e-12) {
        if (v[i] < 0.0) v = -v;
        break;
      }
    }
    out.col(k) = std::sqrt(std::max(lambda, 0.0)) * v;
  }
  return out;
}

/// Squared Frobenius residual |A - F F'|_F^2 of a symmetric factorization.
inline double mf_loss(const Matrix& a, const Matrix& f) {
  require(a.rows() == a.cols(), "mf_loss: matrix must be square");
  require(f.rows() == a.rows(), "mf_loss: factor row count mismatch");
  return (a - f * f.transpose()).squaredNorm();
}

/// Outcome of the spectral linear-classification error bound: the
/// least-squares fit of one-hot labels on the spectral embeddings must have
/// mean squared error at most (1 - homophily) / lambda_{d+1}, with
/// eigenvalues of the normalized Laplacian in ascending order.
struct BoundReport {
  Index dim = 0;
  double phi = 0.0;
  double lambda_d_plus_1 = 0.0;
  double mse_lhs = 0.0;
  double bound_rhs = 0.0;
  bool holds = false;
};

inline BoundReport check_classification_error_bound(
    const Graph& g, const std::vector<int>& labels, Index d) {
  require(static_cast<Index>(labels.size()) == g.num_nodes,
          "check_classification_error_bound: label count mismatch");
  BoundReport rep;
  rep.dim = d;
  rep.phi = homophily_ratio(g, labels);

  const SpectralDecomposition lap = eig_sym(normalized_laplacian(g));
  require(d < g.num_nodes,
          "check_classification_error_bound: need d < num_nodes");
  rep.lambda_d_plus_1 = lap.eigenvalues[d];  // (d+1)-th smallest

  if (rep.lambda_d_plus_1 <= 1e-12) {
    rep.bound_rhs = std::numeric_limits<double>::infinity();
    rep.holds = true;  // vacuous bound
    rep.mse_lhs = 0.0;
    return rep;
  }
  rep.bound_rhs = (1.0 - rep.phi) / rep.lambda_d_plus_1;

  const Matrix zstar = spectral_embeddings(g, d);
  const int c = 1 + *std::max_element(labels.begin(), labels.end());
  Matrix y = Matrix::Zero(g.num_nodes, c);
  for (Index i = 0; i < g.num_nodes; ++i) y(i, labels[i]) = 1.0;

  // Least-squares B with a tiny ridge so the normal equations stay solvable
  // on rank-deficient embeddings.
  Matrix gram = zstar.transpose() * zstar;
  gram.diagonal().array() += 1e-10;
  const Matrix b = gram.ldlt().solve(zstar.transpose() * y);
  rep.mse_lhs = (y - zstar * b).rowwise().squaredNorm().mean();
  rep.holds = rep.mse_lhs <= rep.bound_rhs + 1e-9;
  return rep;
}

struct Split {
  std::vector<Index> train, val, test;

  void validate(Index num_nodes) const {
    std::vector<char> seen(static_cast<size_t>(num_nodes), 0);
    auto check = [&](const std::vector<Index>& part) {
      for (Index i : part) {
        require(i >= 0 && i < num_nodes, "Split: index out of range");
        require(!seen[static_cast<size_t>(i)], "Split: overlapping parts");
        seen[static_cast<size_t>(i)] = 1;
      }
    };
    check(train);
    check(val);
    check(test);
  }
};

struct ProbeConfig {
  double lr = 1e-2;
  double weight_decay = 1e-4;
  Index epochs = 300;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  Matrix weights;  // d x c
  Vector bias;     // c
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;   // NaN when the split part is empty
  double test_accuracy = 0.0;  // NaN when the split part is empty
  Index epochs_run = 0;
};

/// Multinomial logistic regression on frozen embeddings, full batch Adam.
/// Only training labels are touched during fitting; val/test labels are
/// read once at the end for the reported accuracies.
inline ProbeResult linear_probe(const Matrix& z, const std::vector<int>& labels,
                                const Split& split, const ProbeConfig& cfg) {
  require(static_cast<Index>(labels.size()) == z.rows(),
          "linear_probe: label count mismatch");
  split.validate(z.rows());
  require(!split.train.empty(), "linear_probe: empty train split");
  int c = 0;
  for (int l : labels) c = std::max(c, l + 1);
  {
    int first = labels[static_cast<size_t>(split.train[0])];
    bool single = true;
    for (Index i : split.train)
      if (labels[static_cast<size_t>(i)] != first) {
        single = false;
        break;
      }
    require(!single, "linear_probe: train split has a single class");
  }

  const Index d = z.cols();
  const Index nt = static_cast<Index>(split.train.size());
  Matrix zt(nt, d);
  Matrix yt = Matrix::Zero(nt, c);
  for (Index r = 0; r < nt; ++r) {
    zt.row(r) = z.row(split.train[static_cast<size_t>(r)]);
    yt(r, labels[static_cast<size_t>(split.train[static_cast<size_t>(r)])]) = 1.0;
  }

  // Convex problem; zero init keeps the probe deterministic.
  EncoderParams reg;
  reg.kind = EncoderKind::kMlp;
  reg.layers.push_back({Matrix::Zero(d, c), Vector::Zero(c)});
  AdamConfig acfg;
  acfg.lr = cfg.lr;
  acfg.weight_decay = cfg.weight_decay;
  AdamState adam = AdamState::init(reg, acfg);

  for (Index e = 0; e < cfg.epochs; ++e) {
    Matrix logits = zt * reg.layers[0].weight;
    logits.rowwise() += reg.layers[0].bias.transpose();
    // Softmax cross-entropy gradient (p - y)/n.
    Matrix p(nt, c);
    for (Index r = 0; r < nt; ++r) {
      const double m = logits.row(r).maxCoeff();
      p.row(r) = (logits.row(r).array() - m).exp();
      p.row(r) /= p.row(r).sum();
    }
    const Matrix gl = (p - yt) / static_cast<double>(nt);
    EncoderGrads grads;
    grads.d_weight.push_back(zt.transpose() * gl);
    grads.d_bias.push_back(gl.colwise().sum());
    adam_step(adam, reg, grads);
  }

  ProbeResult res;
  res.weights = reg.layers[0].weight;
  res.bias = reg.layers[0].bias;
  res.epochs_run = cfg.epochs;

  auto accuracy = [&](const std::vector<Index>& part) {
    if (part.empty()) return std::numeric_limits<double>::quiet_NaN();
    Index hits = 0;
    for (Index i : part) {
      Vector logit = res.weights.transpose() * z.row(i).transpose() + res.bias;
      Index arg = 0;
      logit.maxCoeff(&arg);
      if (static_cast<int>(arg) == labels[static_cast<size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(part.size());
  };
  res.train_accuracy = accuracy(split.train);
  res.val_accuracy = accuracy(split.val);
  res.test_accuracy = accuracy(split.test);
  return res;
}

}  // namespace localgcl
