#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fracdiff/error.hpp"

namespace fracdiff {

using Index = std::size_t;
using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// Dense vector helpers. Summation always runs in ascending index order so
// results are reproducible bit for bit.
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionMismatch("dot: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

inline double sum(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc;
}

inline double norm2(std::span<const double> x) {
  // Scaled accumulation avoids overflow for huge entries.
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  double acc = 0.0;
  for (double v : x) {
    const double r = v / scale;
    acc += r * r;
  }
  return scale * std::sqrt(acc);
}

inline double norm_inf(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

/// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) {
    throw DimensionMismatch("axpy: length mismatch");
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline Vector ones(Index n) { return Vector(n, 1.0); }

inline Vector unit_vector(Index n, Index i) {
  Vector e(n, 0.0);
  e.at(i) = 1.0;
  return e;
}

inline Vector subtract(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionMismatch("subtract: length mismatch");
  }
  Vector r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] - y[i];
  return r;
}

struct Triplet {
  Index row;
  Index col;
  double value;
};

/**
 * Compressed sparse row matrix.
 *
 * Columns are strictly increasing inside each row, duplicates are merged by
 * summation and explicit zeros are dropped when the matrix is assembled.
 * Instances are immutable once built.
 */
class SparseMatrix {
public:
  SparseMatrix() : row_ptr_(1, 0) {}

  /// Assemble from coordinate entries (any order, duplicates summed).
  static SparseMatrix from_triplets(Index n_rows, Index n_cols,
                                    std::vector<Triplet> entries) {
    for (const auto& e : entries) {
      if (e.row >= n_rows || e.col >= n_cols) {
        throw InvalidArgument("triplet (" + std::to_string(e.row) + ", " +
                              std::to_string(e.col) +
                              ") outside matrix bounds");
      }
      if (!std::isfinite(e.value)) {
        throw InvalidArgument("non-finite matrix entry");
      }
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Triplet& a, const Triplet& b) {
                       return std::tie(a.row, a.col) < std::tie(b.row, b.col);
                     });

    SparseMatrix m;
    m.n_rows_ = n_rows;
    m.n_cols_ = n_cols;
    m.row_ptr_.assign(n_rows + 1, 0);
    m.col_idx_.reserve(entries.size());
    m.values_.reserve(entries.size());

    std::size_t k = 0;
    while (k < entries.size()) {
      const Index r = entries[k].row;
      const Index c = entries[k].col;
      double v = 0.0;
      while (k < entries.size() && entries[k].row == r && entries[k].col == c) {
        v += entries[k].value;
        ++k;
      }
      if (v != 0.0) {
        m.col_idx_.push_back(c);
        m.values_.push_back(v);
        ++m.row_ptr_[r + 1];
      }
    }
    for (Index i = 0; i < n_rows; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
    return m;
  }

  /// Adopt raw CSR arrays; validates every structural invariant.
  static SparseMatrix from_csr(Index n_rows, Index n_cols,
                               std::vector<Index> row_ptr,
                               std::vector<Index> col_idx,
                               std::vector<double> values) {
    if (row_ptr.size() != n_rows + 1 || row_ptr.front() != 0 ||
        row_ptr.back() != col_idx.size() || col_idx.size() != values.size()) {
      throw InvalidArgument("inconsistent CSR arrays");
    }
    for (Index i = 0; i < n_rows; ++i) {
      if (row_ptr[i] > row_ptr[i + 1]) {
        throw InvalidArgument("row_ptr must be nondecreasing");
      }
      for (Index p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
        if (col_idx[p] >= n_cols) throw InvalidArgument("column out of range");
        if (p > row_ptr[i] && col_idx[p] <= col_idx[p - 1]) {
          throw InvalidArgument("columns must be strictly increasing");
        }
        if (!std::isfinite(values[p])) {
          throw InvalidArgument("non-finite matrix entry");
        }
      }
    }
    SparseMatrix m;
    m.n_rows_ = n_rows;
    m.n_cols_ = n_cols;
    m.row_ptr_ = std::move(row_ptr);
    m.col_idx_ = std::move(col_idx);
    m.values_ = std::move(values);
    return m;
  }

  static SparseMatrix identity(Index n) {
    std::vector<Index> rp(n + 1), ci(n);
    std::iota(rp.begin(), rp.end(), Index{0});
    std::iota(ci.begin(), ci.end(), Index{0});
    return from_csr(n, n, std::move(rp), std::move(ci), Vector(n, 1.0));
  }

  Index rows() const noexcept { return n_rows_; }
  Index cols() const noexcept { return n_cols_; }
  Index nnz() const noexcept { return col_idx_.size(); }
  bool is_square() const noexcept { return n_rows_ == n_cols_; }

  const std::vector<Index>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<Index>& col_idx() const noexcept { return col_idx_; }
  const std::vector<double>& values() const noexcept { return values_; }

  std::span<const Index> row_cols(Index i) const {
    return {col_idx_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  std::span<const double> row_values(Index i) const {
    return {values_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }

  /// Entry lookup by binary search; zero when not stored.
  double coeff(Index i, Index j) const {
    const auto cols = row_cols(i);
    const auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return 0.0;
    return values_[row_ptr_[i] + static_cast<Index>(it - cols.begin())];
  }

  double norm_inf() const {
    double m = 0.0;
    for (Index i = 0; i < n_rows_; ++i) {
      double s = 0.0;
      for (double v : row_values(i)) s += std::abs(v);
      m = std::max(m, s);
    }
    return m;
  }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
  Index n_rows_ = 0;
  Index n_cols_ = 0;
  std::vector<Index> row_ptr_;
  std::vector<Index> col_idx_;
  std::vector<double> values_;
};

/// y = A x, or y = A^T x when `transpose` is set.
inline Vector spmv(const SparseMatrix& a, std::span<const double> x,
                   bool transpose = false) {
  if (!transpose) {
    if (x.size() != a.cols()) throw DimensionMismatch("spmv: x has wrong length");
    Vector y(a.rows(), 0.0);
    for (Index i = 0; i < a.rows(); ++i) {
      const auto cols = a.row_cols(i);
      const auto vals = a.row_values(i);
      double acc = 0.0;
      for (std::size_t p = 0; p < cols.size(); ++p) acc += vals[p] * x[cols[p]];
      y[i] = acc;
    }
    return y;
  }
  if (x.size() != a.rows()) throw DimensionMismatch("spmv: x has wrong length");
  Vector y(a.cols(), 0.0);
  // Scatter in ascending row order: each y[j] accumulates rows 0, 1, ...
  for (Index i = 0; i < a.rows(); ++i) {
    const auto cols = a.row_cols(i);
    const auto vals = a.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) y[cols[p]] += vals[p] * x[i];
  }
  return y;
}

/// CSR of A^T by counting sort, O(nnz).
inline SparseMatrix transpose(const SparseMatrix& a) {
  std::vector<Index> rp(a.cols() + 1, 0);
  for (Index c : a.col_idx()) ++rp[c + 1];
  for (Index j = 0; j < a.cols(); ++j) rp[j + 1] += rp[j];

  std::vector<Index> ci(a.nnz());
  Vector vals(a.nnz());
  std::vector<Index> next(rp.begin(), rp.end() - 1);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index p = a.row_ptr()[i]; p < a.row_ptr()[i + 1]; ++p) {
      const Index dst = next[a.col_idx()[p]]++;
      ci[dst] = i;
      vals[dst] = a.values()[p];
    }
  }
  return SparseMatrix::from_csr(a.cols(), a.rows(), std::move(rp),
                                std::move(ci), std::move(vals));
}

/// Symmetric permutation P^T A P with perm[new] = old.
inline SparseMatrix permute_symmetric(const SparseMatrix& a,
                                      std::span<const Index> perm) {
  if (!a.is_square() || perm.size() != a.rows()) {
    throw DimensionMismatch("permute_symmetric: size mismatch");
  }
  const Index n = a.rows();
  std::vector<Index> inv(n);
  for (Index i = 0; i < n; ++i) inv[perm[i]] = i;
  std::vector<Triplet> t;
  t.reserve(a.nnz());
  for (Index i = 0; i < n; ++i) {
    const auto cols = a.row_cols(i);
    const auto vals = a.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      t.push_back({inv[i], inv[cols[p]], vals[p]});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

}  // namespace fracdiff
