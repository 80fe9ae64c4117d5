#include "localgcl/eig.hpp"
#include "localgcl/graph.hpp"
#include "localgcl/rng.hpp"

#include <gtest/gtest.h>

using namespace localgcl;

namespace {

Matrix random_symmetric(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = rng.gaussian();
  return (m + m.transpose()) / 2.0;
}

Graph random_graph(Index n, double p, std::uint64_t seed) {
  // One block: plain G(n, p), plus a spanning path so no node is isolated.
  Rng rng(seed);
  EdgeList edges;
  for (Index i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (rng.uniform() < p) edges.emplace_back(i, j);
  return build_graph(edges, n);
}

}  // namespace

TEST(EigSym, Identity) {
  const SpectralDecomposition d = eig_sym(Matrix::Identity(4, 4));
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(d.eigenvalues[i], 1.0, 1e-12);
}

TEST(EigSym, TwoByTwoSwap) {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  const SpectralDecomposition d = eig_sym(m);
  EXPECT_NEAR(d.eigenvalues[0], -1.0, 1e-12);
  EXPECT_NEAR(d.eigenvalues[1], 1.0, 1e-12);
}

TEST(EigSym, ReconstructionAndOrthonormality) {
  const Matrix m = random_symmetric(30, 42);
  const SpectralDecomposition d = eig_sym(m);
  const Matrix utu = d.eigenvectors.transpose() * d.eigenvectors;
  EXPECT_LT((utu - Matrix::Identity(30, 30)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((d.reconstruct() - m).norm() / m.norm(), 1e-6);
  EXPECT_LT((d.reconstruct() - m).cwiseAbs().maxCoeff(), 1e-8);
  for (Index i = 1; i < 30; ++i)
    EXPECT_LE(d.eigenvalues[i - 1], d.eigenvalues[i]);
}

TEST(EigSym, RejectsNonSymmetric) {
  Matrix m(2, 2);
  m << 0, 1, 0.5, 0;
  EXPECT_THROW(eig_sym(m), invalid_input);
}

TEST(EigSym, LaplacianSpectrumContained) {
  // Normalized Laplacian eigenvalues stay in [0, 2] on random graphs.
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(derive_seed(999, s));
    const Index n = 8 + static_cast<Index>(rng.below(25));
    const double p = 0.05 + 0.4 * rng.uniform();
    const Graph g = random_graph(n, p, derive_seed(1234, s));
    const SpectralDecomposition d = eig_sym(normalized_laplacian(g));
    EXPECT_GE(d.eigenvalues[0], -1e-9);
    EXPECT_LE(d.eigenvalues[n - 1], 2.0 + 1e-9);
    // Connected by construction: exactly one (near-)zero eigenvalue.
    EXPECT_NEAR(d.eigenvalues[0], 0.0, 1e-9);
  }
}
