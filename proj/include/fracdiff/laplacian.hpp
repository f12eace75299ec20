#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "fracdiff/error.hpp"
#include "fracdiff/sparse.hpp"

namespace fracdiff {

/**
 * Out-degree graph Laplacian L = D - A together with the data every solver
 * needs: the cached transpose, the degree vector and, once computed, the left
 * null vector z (z^T L = 0, z > 0, sum(z) = 1) and the spectral extents.
 */
struct LaplacianSystem {
  SparseMatrix L;
  SparseMatrix Lt;
  Vector degrees;
  Index n = 0;
  std::optional<Vector> z;
  std::optional<double> lambda2;
  std::optional<double> lambdaN;
};

inline LaplacianSystem build_laplacian(const SparseMatrix& adj) {
  if (!adj.is_square()) throw InvalidArgument("adjacency matrix must be square");
  const Index n = adj.rows();

  LaplacianSystem sys;
  sys.n = n;
  sys.degrees.assign(n, 0.0);

  std::vector<Triplet> t;
  t.reserve(adj.nnz() + n);
  for (Index i = 0; i < n; ++i) {
    const auto cols = adj.row_cols(i);
    const auto vals = adj.row_values(i);
    double d = 0.0;
    for (std::size_t p = 0; p < cols.size(); ++p) {
      if (cols[p] == i) {
        throw InvalidArgument("self-loop at node " + std::to_string(i));
      }
      if (vals[p] < 0.0) {
        throw InvalidArgument("negative edge weight at (" + std::to_string(i) +
                              ", " + std::to_string(cols[p]) + ")");
      }
      d += vals[p];
      t.push_back({i, cols[p], -vals[p]});
    }
    sys.degrees[i] = d;
    t.push_back({i, i, d});
  }
  sys.L = SparseMatrix::from_triplets(n, n, std::move(t));
  sys.Lt = transpose(sys.L);
  return sys;
}

/// Strongly connected component labels, computed by an iterative Tarjan
/// traversal. Returns (component id per node, number of components).
inline std::pair<std::vector<Index>, Index> strongly_connected_components(
    const SparseMatrix& adj) {
  if (!adj.is_square()) throw InvalidArgument("adjacency matrix must be square");
  const Index n = adj.rows();
  constexpr Index unvisited = std::numeric_limits<Index>::max();

  std::vector<Index> index(n, unvisited), low(n, 0), comp(n, unvisited);
  std::vector<bool> on_stack(n, false);
  std::vector<Index> stack;
  // Call frames: (node, position of next edge to explore).
  std::vector<std::pair<Index, Index>> frames;
  Index counter = 0, n_comp = 0;

  for (Index root = 0; root < n; ++root) {
    if (index[root] != unvisited) continue;
    frames.emplace_back(root, adj.row_ptr()[root]);
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;

    while (!frames.empty()) {
      auto& [v, pos] = frames.back();
      if (pos < adj.row_ptr()[v + 1]) {
        const Index w = adj.col_idx()[pos++];
        if (index[w] == unvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.emplace_back(w, adj.row_ptr()[w]);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      const Index node = v;
      frames.pop_back();
      if (!frames.empty()) {
        const Index parent = frames.back().first;
        low[parent] = std::min(low[parent], low[node]);
      }
      if (low[node] == index[node]) {
        Index w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = n_comp;
        } while (w != node);
        ++n_comp;
      }
    }
  }
  return {std::move(comp), n_comp};
}

/// Induced subgraph on `nodes` (must be sorted ascending); nodes are relabeled
/// by their position in the list.
inline SparseMatrix induced_subgraph(const SparseMatrix& adj,
                                     std::span<const Index> nodes) {
  constexpr Index absent = std::numeric_limits<Index>::max();
  std::vector<Index> local(adj.rows(), absent);
  for (Index k = 0; k < nodes.size(); ++k) local[nodes[k]] = k;
  std::vector<Triplet> t;
  for (Index k = 0; k < nodes.size(); ++k) {
    const auto cols = adj.row_cols(nodes[k]);
    const auto vals = adj.row_values(nodes[k]);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      if (local[cols[p]] != absent) t.push_back({k, local[cols[p]], vals[p]});
    }
  }
  return SparseMatrix::from_triplets(nodes.size(), nodes.size(), std::move(t));
}

struct Component {
  std::vector<Index> nodes;  ///< original indices, ascending
  SparseMatrix adjacency;    ///< induced, relabeled in ascending original order
};

/// Largest strongly connected component by node count; ties go to the
/// component containing the smallest original index.
inline Component largest_scc(const SparseMatrix& adj) {
  const auto [comp, n_comp] = strongly_connected_components(adj);
  if (n_comp == 0) return {{}, SparseMatrix::from_triplets(0, 0, {})};

  std::vector<Index> size(n_comp, 0);
  std::vector<Index> first(n_comp, std::numeric_limits<Index>::max());
  for (Index i = 0; i < comp.size(); ++i) {
    ++size[comp[i]];
    first[comp[i]] = std::min(first[comp[i]], i);
  }
  Index best = 0;
  for (Index c = 1; c < n_comp; ++c) {
    if (size[c] > size[best] || (size[c] == size[best] && first[c] < first[best])) {
      best = c;
    }
  }
  Component out;
  for (Index i = 0; i < comp.size(); ++i) {
    if (comp[i] == best) out.nodes.push_back(i);
  }
  out.adjacency = induced_subgraph(adj, out.nodes);
  return out;
}

inline bool is_strongly_connected(const SparseMatrix& adj) {
  if (adj.rows() == 0) return true;
  return strongly_connected_components(adj).second == 1;
}

}  // namespace fracdiff
