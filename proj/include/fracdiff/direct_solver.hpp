#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>
#include <span>
#include <vector>

#include "fracdiff/error.hpp"
#include "fracdiff/laplacian.hpp"
#include "fracdiff/sparse.hpp"

namespace fracdiff {

/// Row/column permutation with perm[new] = old.
struct Permutation {
  std::vector<Index> perm;
  std::vector<Index> inverse;

  static Permutation from_order(std::vector<Index> order) {
    Permutation p;
    p.inverse.assign(order.size(), 0);
    for (Index i = 0; i < order.size(); ++i) p.inverse[order[i]] = i;
    p.perm = std::move(order);
    return p;
  }

  static Permutation identity(Index n) {
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    return from_order(std::move(order));
  }

  Index size() const noexcept { return perm.size(); }
};

enum class Ordering { natural, rcm };

/// Reverse Cuthill-McKee on the pattern of S + S^T (diagonal ignored).
inline Permutation rcm_ordering(const SparseMatrix& s) {
  if (!s.is_square()) throw InvalidArgument("rcm_ordering: matrix must be square");
  const Index n = s.rows();

  std::vector<std::vector<Index>> adj(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j : s.row_cols(i)) {
      if (i == j) continue;
      adj[i].push_back(j);
      adj[j].push_back(i);
    }
  }
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  const auto by_degree = [&](Index a, Index b) {
    return adj[a].size() != adj[b].size() ? adj[a].size() < adj[b].size() : a < b;
  };
  for (auto& nb : adj) std::sort(nb.begin(), nb.end(), by_degree);

  std::vector<Index> candidates(n);
  std::iota(candidates.begin(), candidates.end(), Index{0});
  std::sort(candidates.begin(), candidates.end(), by_degree);

  std::vector<bool> visited(n, false);
  std::vector<Index> order;
  order.reserve(n);
  std::size_t next_start = 0;
  while (order.size() < n) {
    while (visited[candidates[next_start]]) ++next_start;
    const Index start = candidates[next_start];
    visited[start] = true;
    std::size_t head = order.size();
    order.push_back(start);
    while (head < order.size()) {
      const Index v = order[head++];
      for (Index w : adj[v]) {
        if (!visited[w]) {
          visited[w] = true;
          order.push_back(w);
        }
      }
    }
  }
  std::reverse(order.begin(), order.end());
  return Permutation::from_order(std::move(order));
}

/// Maximum |i - j| over stored entries of P^T S P.
inline Index bandwidth(const SparseMatrix& s, const Permutation& p) {
  Index bw = 0;
  for (Index i = 0; i < s.rows(); ++i) {
    for (Index j : s.row_cols(i)) {
      const Index a = p.inverse[i], b = p.inverse[j];
      bw = std::max(bw, a > b ? a - b : b - a);
    }
  }
  return bw;
}

/**
 * Factors of P^T (S - shift I) P = Lfac * Ufac.
 *
 * Lfac is unit lower triangular (diagonal stored), Ufac upper triangular with
 * the LDU diagonal folded in. In the singular mode (shift == 0) the last
 * diagonal entry of Ufac may be zero.
 */
struct LUFactors {
  SparseMatrix Lfac;
  SparseMatrix Ufac;
  Permutation perm;
  double shift = 0.0;
  bool singular = false;

  Index size() const noexcept { return perm.size(); }
  Index fill() const noexcept { return Lfac.nnz() + Ufac.nnz(); }
};

inline constexpr double kPivotTolerance = 1e-14;

/**
 * Gaussian elimination without pivoting on P^T (S - xi I) P.
 *
 * Rows are eliminated top-down; each row is merged against the already
 * computed rows of Ufac in increasing column order (a min-heap tracks the
 * fill created along the way). A pivot below 1e-14 times the row's infinity
 * norm raises PivotBreakdown, except for the last pivot when xi == 0.
 */
inline LUFactors lu_factorize(const SparseMatrix& s, double xi,
                              Ordering ordering = Ordering::rcm) {
  if (!s.is_square()) throw InvalidArgument("lu_factorize: matrix must be square");
  const Index n = s.rows();

  LUFactors f;
  f.shift = xi;
  f.perm = ordering == Ordering::rcm ? rcm_ordering(s) : Permutation::identity(n);
  const SparseMatrix m = permute_symmetric(s, f.perm.perm);

  std::vector<Index> lp{0}, up{0}, li, ui;
  Vector lv, uv;
  std::vector<Index> u_diag_pos(n);  // position of U(k,k) in ui/uv

  Vector work(n, 0.0);
  std::vector<Index> mark(n, std::numeric_limits<Index>::max());
  std::vector<Index> upper;
  std::priority_queue<Index, std::vector<Index>, std::greater<>> lower;

  for (Index i = 0; i < n; ++i) {
    upper.clear();
    double row_norm = 0.0;
    const auto touch = [&](Index j) {
      if (mark[j] == i) return;
      mark[j] = i;
      work[j] = 0.0;
      if (j < i) {
        lower.push(j);
      } else {
        upper.push_back(j);
      }
    };
    touch(i);
    const auto cols = m.row_cols(i);
    const auto vals = m.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      touch(cols[p]);
      work[cols[p]] += vals[p];
    }
    work[i] -= xi;
    for (std::size_t p = 0; p < cols.size(); ++p) row_norm += std::abs(work[cols[p]]);
    if (std::find(cols.begin(), cols.end(), i) == cols.end()) {
      row_norm += std::abs(work[i]);
    }

    while (!lower.empty()) {
      const Index k = lower.top();
      lower.pop();
      const double l = work[k] / uv[u_diag_pos[k]];
      li.push_back(k);
      lv.push_back(l);
      for (Index q = u_diag_pos[k] + 1; q < up[k + 1]; ++q) {
        touch(ui[q]);
        work[ui[q]] -= l * uv[q];
      }
    }
    li.push_back(i);
    lv.push_back(1.0);
    lp.push_back(li.size());

    const double pivot = work[i];
    const bool last = i + 1 == n;
    if (!(std::abs(pivot) >= kPivotTolerance * row_norm) || row_norm == 0.0) {
      if (!(last && xi == 0.0)) throw PivotBreakdown(i, pivot);
      f.singular = true;
    }
    std::sort(upper.begin(), upper.end());
    for (Index j : upper) {
      if (j == i) u_diag_pos[i] = ui.size();
      ui.push_back(j);
      uv.push_back(work[j]);
    }
    up.push_back(ui.size());
  }

  f.Lfac = SparseMatrix::from_csr(n, n, std::move(lp), std::move(li), std::move(lv));
  f.Ufac = SparseMatrix::from_csr(n, n, std::move(up), std::move(ui), std::move(uv));
  return f;
}

/// Solves (S - shift I) x = b with previously computed factors.
inline Vector solve(const LUFactors& f, std::span<const double> b) {
  const Index n = f.size();
  if (b.size() != n) throw DimensionMismatch("solve: right-hand side has wrong length");
  if (f.singular) throw NumericalError("solve: factors are singular");

  Vector y(n);
  for (Index i = 0; i < n; ++i) y[i] = b[f.perm.perm[i]];

  // Forward: unit lower triangular, diagonal stored last in each row.
  const auto& lp = f.Lfac.row_ptr();
  const auto& li = f.Lfac.col_idx();
  const auto& lv = f.Lfac.values();
  for (Index i = 0; i < n; ++i) {
    double acc = y[i];
    for (Index p = lp[i]; p + 1 < lp[i + 1]; ++p) acc -= lv[p] * y[li[p]];
    y[i] = acc;
  }
  // Backward: diagonal stored first in each row.
  const auto& up = f.Ufac.row_ptr();
  const auto& ui = f.Ufac.col_idx();
  const auto& uv = f.Ufac.values();
  for (Index i = n; i-- > 0;) {
    double acc = y[i];
    for (Index p = up[i] + 1; p < up[i + 1]; ++p) acc -= uv[p] * y[ui[p]];
    y[i] = acc / uv[up[i]];
  }

  Vector x(n);
  for (Index i = 0; i < n; ++i) x[f.perm.perm[i]] = y[i];
  return x;
}

/**
 * Left null vector of the Laplacian: L^T z = 0, z > 0, sum(z) = 1.
 *
 * Factors P^T L^T P = LDU by elimination without pivoting, fixes the last
 * unknown to 1, back-substitutes through the nonsingular leading rows of
 * Ufac, then undoes the permutation and normalizes.
 */
inline Vector null_left_vector(const LaplacianSystem& sys,
                               Ordering ordering = Ordering::rcm) {
  const Index n = sys.n;
  if (n == 0) throw InvalidArgument("null_left_vector: empty graph");
  if (n == 1) return {1.0};
  if (!is_strongly_connected(sys.L)) {
    throw NotStronglyConnected("graph is not strongly connected");
  }

  LUFactors f;
  try {
    f = lu_factorize(sys.Lt, 0.0, ordering);
  } catch (const PivotBreakdown& e) {
    throw NotStronglyConnected(std::string("LDU breakdown: ") + e.what());
  }

  const auto& up = f.Ufac.row_ptr();
  const auto& ui = f.Ufac.col_idx();
  const auto& uv = f.Ufac.values();
  Vector y(n, 0.0);
  y[n - 1] = 1.0;
  for (Index i = n - 1; i-- > 0;) {
    double acc = 0.0;
    for (Index p = up[i] + 1; p < up[i + 1]; ++p) acc -= uv[p] * y[ui[p]];
    y[i] = acc / uv[up[i]];
  }

  Vector z(n);
  for (Index i = 0; i < n; ++i) z[f.perm.perm[i]] = y[i];
  const double total = sum(z);
  for (double& v : z) v /= total;
  for (double v : z) {
    if (!(v > 0.0)) throw NotStronglyConnected("null vector is not positive");
  }
  return z;
}

/// Computes and caches z on the system when missing.
inline const Vector& ensure_null_vector(LaplacianSystem& sys,
                                        Ordering ordering = Ordering::rcm) {
  if (!sys.z) sys.z = null_left_vector(sys, ordering);
  return *sys.z;
}

}  // namespace fracdiff
