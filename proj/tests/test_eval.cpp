#include "localgcl/eval.hpp"
#include "localgcl/loss.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace localgcl;

namespace {

Graph disjoint_cliques(Index num_cliques, Index size) {
  EdgeList edges;
  std::vector<int> labels;
  for (Index c = 0; c < num_cliques; ++c) {
    const Index base = c * size;
    for (Index i = 0; i < size; ++i) {
      labels.push_back(static_cast<int>(c));
      for (Index j = i + 1; j < size; ++j)
        edges.emplace_back(base + i, base + j);
    }
  }
  return build_graph(edges, num_cliques * size, std::nullopt, labels,
                     static_cast<int>(num_cliques));
}

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.gaussian();
  return m;
}

}  // namespace

TEST(SpectralEmbeddings, DisjointTrianglesSpanComponentIndicators) {
  const Graph g = disjoint_cliques(2, 3);
  const Matrix z = spectral_embeddings(g, 2);
  // Both eigenvalue-1 directions: column norms are 1 and the component
  // indicators lie in the column span.
  for (Index comp = 0; comp < 2; ++comp) {
    Vector ind = Vector::Zero(6);
    for (Index i = 0; i < 3; ++i) ind[comp * 3 + i] = 1.0 / std::sqrt(3.0);
    const Vector coef = (z.transpose() * z).ldlt().solve(z.transpose() * ind);
    EXPECT_LT((z * coef - ind).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(SpectralEmbeddings, CycleTopDirection) {
  EdgeList edges;
  for (Index i = 0; i < 4; ++i) edges.emplace_back(i, (i + 1) % 4);
  const Graph g = build_graph(edges, 4);
  const Matrix z = spectral_embeddings(g, 1);
  // Top eigenvalue 1, eigenvector proportional to sqrt-degree, sign fixed.
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(z(i, 0), 0.5, 1e-9);
}

TEST(SpectralEmbeddings, DeterministicSignConvention) {
  const Graph g = sbm_generate({10, 10}, 0.5, 0.1, 7);
  const Matrix a = spectral_embeddings(g, 3);
  const Matrix b = spectral_embeddings(g, 3);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
  for (Index k = 0; k < 3; ++k) {
    Index first = 0;
    while (first < 20 && std::abs(a(first, k)) <= 1e-12) ++first;
    ASSERT_LT(first, 20);
    EXPECT_GT(a(first, k), 0.0);
  }
}

TEST(SpectralEmbeddings, NegativeEigenvalueRejected) {
  const Graph g = build_graph({{0, 1}}, 2);  // spectrum {1, -1}
  EXPECT_NO_THROW(spectral_embeddings(g, 1));
  EXPECT_THROW(spectral_embeddings(g, 2), invalid_input);
  EXPECT_THROW(spectral_embeddings(g, 0), invalid_input);
  EXPECT_THROW(spectral_embeddings(g, 3), invalid_input);
}

TEST(MfLoss, ClosedFormsAndOracle) {
  const Graph g = sbm_generate({8, 8}, 0.5, 0.2, 11);
  const Matrix a = normalized_adjacency(g);
  EXPECT_NEAR(mf_loss(a, Matrix::Zero(16, 3)), a.squaredNorm(), 1e-12);
  EXPECT_NEAR(mf_loss(Matrix::Identity(5, 5), Matrix::Identity(5, 5)), 0.0,
              1e-15);

  const Matrix f = random_matrix(16, 3, 12) * 0.3;
  // Naive triple-loop residual.
  double acc = 0.0;
  for (Index i = 0; i < 16; ++i)
    for (Index j = 0; j < 16; ++j) {
      double ff = 0.0;
      for (Index k = 0; k < 3; ++k) ff += f(i, k) * f(j, k);
      acc += (a(i, j) - ff) * (a(i, j) - ff);
    }
  EXPECT_NEAR(mf_loss(a, f), acc, 1e-10);
}

TEST(EckartYoung, SpectralFactorBeatsRandomFactors) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Graph g = sbm_generate({12, 12}, 0.5, 0.1, derive_seed(400, s));
    const Matrix a = normalized_adjacency(g);
    const Index d = 2 + static_cast<Index>(s % 2);
    const Matrix zstar = spectral_embeddings(g, d);
    const double best = mf_loss(a, zstar);
    Rng rng(derive_seed(401, s));
    for (int rep = 0; rep < 100; ++rep) {
      Matrix f(24, d);
      for (Index i = 0; i < 24; ++i)
        for (Index j = 0; j < d; ++j) f(i, j) = 0.4 * rng.gaussian();
      EXPECT_LE(best, mf_loss(a, f));
    }
  }
}

TEST(ErrorBound, PerfectHomophilyCliquesAreExact) {
  const Graph g = disjoint_cliques(3, 5);
  const BoundReport rep = check_classification_error_bound(g, *g.labels, 3);
  EXPECT_DOUBLE_EQ(rep.phi, 1.0);
  EXPECT_NEAR(rep.bound_rhs, 0.0, 1e-15);
  EXPECT_LT(rep.mse_lhs, 1e-9);
  EXPECT_TRUE(rep.holds);
}

TEST(ErrorBound, HoldsOnSbmSeeds) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Graph g = sbm_generate({50, 50}, 0.2, 0.02, derive_seed(500, s));
    const BoundReport rep = check_classification_error_bound(g, *g.labels, 8);
    EXPECT_TRUE(rep.holds)
        << "seed " << s << " mse " << rep.mse_lhs << " bound " << rep.bound_rhs;
  }
}

TEST(ErrorBound, FullSpectrumUsage) {
  // Star graph, d = |V| - 1: adjacency spectrum {1, 0, 0, -1} so the top
  // three eigenvalues are usable and lambda_{|V|}(L) = 2.
  EdgeList star = {{0, 1}, {0, 2}, {0, 3}};
  const Graph g = build_graph(star, 4);
  const std::vector<int> labels = {0, 1, 1, 1};
  const BoundReport rep = check_classification_error_bound(g, labels, 3);
  // Independent spectrum route for the ingredients.
  const SpectralDecomposition lap = eig_sym(normalized_laplacian(g));
  EXPECT_NEAR(rep.lambda_d_plus_1, lap.eigenvalues[3], 1e-9);
  EXPECT_NEAR(rep.lambda_d_plus_1, 2.0, 1e-9);
  EXPECT_DOUBLE_EQ(rep.phi, 0.0);
  EXPECT_NEAR(rep.bound_rhs, 0.5, 1e-9);
  EXPECT_TRUE(rep.holds);
}

TEST(ErrorBound, VacuousWhenSpectrumDisconnects) {
  // Two components and d = 1: lambda_2 = 0, bound infinite, holds trivially.
  const Graph g = disjoint_cliques(2, 4);
  const BoundReport rep = check_classification_error_bound(g, *g.labels, 1);
  EXPECT_TRUE(std::isinf(rep.bound_rhs));
  EXPECT_TRUE(rep.holds);
}

TEST(ErrorBound, BoundMonotoneInDimension) {
  const Graph g = sbm_generate({30, 30}, 0.3, 0.05, 600);
  double prev = std::numeric_limits<double>::infinity();
  for (Index d : {1, 2, 4, 8, 16}) {
    const BoundReport rep = check_classification_error_bound(g, *g.labels, d);
    EXPECT_LE(rep.bound_rhs, prev + 1e-12) << "d " << d;
    prev = rep.bound_rhs;
  }
}

TEST(SpectralOptimum, BeatsRandomNormalizedMatricesOnLoss) {
  // Weak form of the optimality claim: the renormalized spectral factor
  // achieves lower contrastive loss than random unit embeddings.
  const Graph g = sbm_generate({10, 10}, 0.6, 0.1, 601);
  const Index d = 2;
  Matrix zstar = spectral_embeddings(g, d);
  for (Index i = 0; i < zstar.rows(); ++i) {
    const double n = zstar.row(i).norm();
    ASSERT_GT(n, 0.0);
    zstar.row(i) /= n;
  }
  LossConfig cfg;
  cfg.tau = 0.5;
  const double base = local_gcl_loss({zstar, true}, g, cfg).total;
  Rng rng(602);
  for (int rep = 0; rep < 50; ++rep) {
    Matrix r(20, d);
    for (Index i = 0; i < 20; ++i) r.row(i) = rng.unit_vector(d);
    EXPECT_LT(base, local_gcl_loss({r, true}, g, cfg).total);
  }
}

TEST(LinearProbe, SeparableToyReachesPerfectAccuracy) {
  Matrix z(8, 2);
  z << 1, 0, 0.9, 0.1, 0.8, -0.1, 1.1, 0.05,
      0, 1, 0.1, 0.9, -0.05, 1.05, 0.12, 0.8;
  const std::vector<int> labels = {0, 0, 0, 0, 1, 1, 1, 1};
  Split split;
  split.train = {0, 1, 4, 5};
  split.val = {2, 6};
  split.test = {3, 7};
  const ProbeResult res = linear_probe(z, labels, split, {});
  EXPECT_DOUBLE_EQ(res.train_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(res.val_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(res.test_accuracy, 1.0);
}

TEST(LinearProbe, ShuffledLabelsGiveChanceLevel) {
  const Index n = 100;
  const Matrix z = random_matrix(n, 8, 603);
  Split split;
  for (Index i = 0; i < 60; ++i) split.train.push_back(i);
  for (Index i = 60; i < n; ++i) split.test.push_back(i);
  double mean_acc = 0.0;
  for (int shuffle = 0; shuffle < 20; ++shuffle) {
    std::vector<int> labels(n);
    for (Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 5);
    Rng rng(derive_seed(604, shuffle));
    for (Index i = n - 1; i > 0; --i)
      std::swap(labels[i], labels[rng.below(static_cast<std::uint64_t>(i + 1))]);
    const ProbeResult res = linear_probe(z, labels, split, {});
    mean_acc += res.test_accuracy / 20.0;
  }
  EXPECT_NEAR(mean_acc, 0.2, 0.05);
}

TEST(LinearProbe, DeterministicAndValidated) {
  const Matrix z = random_matrix(20, 4, 605);
  std::vector<int> labels(20);
  for (Index i = 0; i < 20; ++i) labels[i] = static_cast<int>(i % 3);
  Split split;
  for (Index i = 0; i < 12; ++i) split.train.push_back(i);
  for (Index i = 12; i < 20; ++i) split.test.push_back(i);
  const ProbeResult a = linear_probe(z, labels, split, {});
  const ProbeResult b = linear_probe(z, labels, split, {});
  EXPECT_EQ((a.weights - b.weights).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(a.test_accuracy, b.test_accuracy);

  Split empty_train;
  empty_train.test = {0, 1};
  EXPECT_THROW(linear_probe(z, labels, empty_train, {}), invalid_input);

  Split single_class;
  single_class.train = {0, 3, 6};  // all label 0
  EXPECT_THROW(linear_probe(z, labels, single_class, {}), invalid_input);

  Split overlapping;
  overlapping.train = {0, 1};
  overlapping.test = {1, 2};
  EXPECT_THROW(linear_probe(z, labels, overlapping, {}), invalid_input);
}
