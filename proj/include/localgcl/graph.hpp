#pragma once

#include "localgcl/common.hpp"
#include "localgcl/rng.hpp"

#include <algorithm>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace localgcl {

/// Undirected graph in CSR form. The adjacency is stored symmetrically
/// (every edge appears in both rows), with no self-loops and no duplicate
/// entries; column indices are sorted within each row.
struct Graph {
  Index num_nodes = 0;
  std::vector<Index> row_offsets;  // length num_nodes + 1
  std::vector<Index> col_indices;  // sorted per row
  std::optional<Matrix> features;  // |V| x f
  std::optional<std::vector<int>> labels;  // class ids in [0, num_classes)
  int num_classes = 0;  // 0 when labels are absent

  Index degree(Index i) const { return row_offsets[i + 1] - row_offsets[i]; }

  std::span<const Index> neighbors(Index i) const {
    return {col_indices.data() + row_offsets[i],
            static_cast<size_t>(degree(i))};
  }

  bool has_edge(Index i, Index j) const {
    const auto nb = neighbors(i);
    return std::binary_search(nb.begin(), nb.end(), j);
  }

  /// Number of stored (ordered) adjacency entries, i.e. 2x the edge count.
  Index num_directed_edges() const {
    return static_cast<Index>(col_indices.size());
  }

  Index min_degree() const {
    Index m = num_nodes == 0 ? 0 : degree(0);
    for (Index i = 1; i < num_nodes; ++i) m = std::min(m, degree(i));
    return m;
  }

  std::vector<Index> isolated_nodes() const {
    std::vector<Index> out;
    for (Index i = 0; i < num_nodes; ++i)
      if (degree(i) == 0) out.push_back(i);
    return out;
  }
};

using EdgeList = std::vector<std::pair<Index, Index>>;

/// Builds a clean undirected CSR graph from an arbitrary edge list:
/// symmetrizes, drops self-loops, deduplicates, sorts rows.
inline Graph build_graph(const EdgeList& edges, Index num_nodes,
                         std::optional<Matrix> features = std::nullopt,
                         std::optional<std::vector<int>> labels = std::nullopt,
                         int num_classes = 0) {
  require(num_nodes > 0, "build_graph: num_nodes must be positive");
  if (features) {
    require(features->rows() == num_nodes,
            "build_graph: feature row count != num_nodes");
  }
  if (labels) {
    require(static_cast<Index>(labels->size()) == num_nodes,
            "build_graph: label count != num_nodes");
    int max_label = -1;
    for (int l : *labels) {
      require(l >= 0, "build_graph: negative label");
      max_label = std::max(max_label, l);
    }
    if (num_classes == 0) num_classes = max_label + 1;
    require(max_label < num_classes, "build_graph: label >= num_classes");
  }

  std::vector<std::pair<Index, Index>> dir;
  dir.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    require(u >= 0 && u < num_nodes && v >= 0 && v < num_nodes,
            "build_graph: edge endpoint out of range");
    if (u == v) continue;
    dir.emplace_back(u, v);
    dir.emplace_back(v, u);
  }
  std::sort(dir.begin(), dir.end());
  dir.erase(std::unique(dir.begin(), dir.end()), dir.end());

  Graph g;
  g.num_nodes = num_nodes;
  g.row_offsets.assign(static_cast<size_t>(num_nodes) + 1, 0);
  for (const auto& [u, v] : dir) g.row_offsets[u + 1]++;
  for (Index i = 0; i < num_nodes; ++i)
    g.row_offsets[i + 1] += g.row_offsets[i];
  g.col_indices.reserve(dir.size());
  for (const auto& [u, v] : dir) g.col_indices.push_back(v);
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.num_classes = g.labels ? num_classes : 0;
  return g;
}

/// Dense symmetric normalized adjacency D^{-1/2} A D^{-1/2}.
/// Every node must have degree >= 1; eigenvalues land in [-1, 1].
inline Matrix normalized_adjacency(const Graph& g) {
  for (Index i = 0; i < g.num_nodes; ++i) {
    if (g.degree(i) == 0)
      throw invalid_input("normalized_adjacency: isolated node " +
                          std::to_string(i));
  }
  Vector inv_sqrt_deg(g.num_nodes);
  for (Index i = 0; i < g.num_nodes; ++i)
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i)));
  Matrix a = Matrix::Zero(g.num_nodes, g.num_nodes);
  for (Index i = 0; i < g.num_nodes; ++i)
    for (Index j : g.neighbors(i)) a(i, j) = inv_sqrt_deg[i] * inv_sqrt_deg[j];
  return a;
}

/// Dense symmetric normalized Laplacian L = I - D^{-1/2} A D^{-1/2}.
inline Matrix normalized_laplacian(const Graph& g) {
  Matrix l = -normalized_adjacency(g);
  l.diagonal().array() += 1.0;
  return l;
}

/// Fraction of ordered adjacency entries whose endpoints share a label.
inline double homophily_ratio(const Graph& g,
                              const std::vector<int>& labels) {
  require(static_cast<Index>(labels.size()) == g.num_nodes,
          "homophily_ratio: label count != num_nodes");
  require(g.num_directed_edges() > 0, "homophily_ratio: graph has no edges");
  Index matches = 0;
  for (Index i = 0; i < g.num_nodes; ++i)
    for (Index j : g.neighbors(i))
      if (labels[i] == labels[j]) ++matches;
  return static_cast<double>(matches) /
         static_cast<double>(g.num_directed_edges());
}

inline double homophily_ratio(const Graph& g) {
  require(g.labels.has_value(), "homophily_ratio: graph has no labels");
  return homophily_ratio(g, *g.labels);
}

/// Rayleigh quotient u'Mu / u'u of a symmetric matrix.
inline double rayleigh_quotient(const Matrix& m,
                                const Eigen::Ref<const Vector>& u) {
  require(m.rows() == m.cols(), "rayleigh_quotient: matrix not square");
  require(u.size() == m.rows(), "rayleigh_quotient: dimension mismatch");
  const double denom = u.squaredNorm();
  require(denom > 0.0, "rayleigh_quotient: zero vector");
  return u.dot(m * u) / denom;
}

/// Stochastic block model sampler. Labels are block ids; deterministic per
/// seed. Degenerate probabilities (0 or 1) are allowed, as are
/// disassortative settings with p_out > p_in; isolated nodes are not
/// repaired here -- downstream operators reject them.
inline Graph sbm_generate(const std::vector<Index>& block_sizes, double p_in,
                          double p_out, std::uint64_t seed) {
  require(!block_sizes.empty(), "sbm_generate: no blocks");
  for (Index b : block_sizes) require(b > 0, "sbm_generate: empty block");
  require(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0,
          "sbm_generate: probabilities must be in [0, 1]");

  Index n = 0;
  std::vector<int> labels;
  for (size_t b = 0; b < block_sizes.size(); ++b) {
    n += block_sizes[b];
    labels.insert(labels.end(), static_cast<size_t>(block_sizes[b]),
                  static_cast<int>(b));
  }

  Rng rng(seed);
  EdgeList edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double p = labels[i] == labels[j] ? p_in : p_out;
      if (rng.uniform() < p) edges.emplace_back(i, j);
    }
  }
  return build_graph(edges, n, std::nullopt, std::move(labels),
                     static_cast<int>(block_sizes.size()));
}

}  // namespace localgcl
