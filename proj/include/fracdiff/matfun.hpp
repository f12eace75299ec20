#pragma once

#include <cmath>
#include <cstdio>
#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracdiff/error.hpp"
#include "fracdiff/laplacian.hpp"
#include "fracdiff/sparse.hpp"

namespace fracdiff {

using Complex = std::complex<double>;
using DenseMatrix = Eigen::MatrixXd;

/// Parameters of f(z) = exp(-t z^alpha).
struct FracExpParams {
  double t = 1.0;
  double alpha = 0.5;

  void validate() const {
    if (!(t >= 0.0) || !std::isfinite(t)) {
      throw InvalidArgument("time t must be finite and nonnegative");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) {
      throw InvalidArgument("alpha must lie in (0, 1]");
    }
  }
};

/// Principal branch z^alpha with the cut on the open negative real axis.
inline Complex frac_power(Complex z, double alpha) {
  if (z == Complex{0.0, 0.0}) return {0.0, 0.0};
  if (alpha == 1.0) return z;
  if (z.imag() == 0.0 && z.real() < 0.0) {
    throw BranchCutError("z^alpha requested on the negative real axis (z = " +
                         std::to_string(z.real()) + ")");
  }
  if (z.imag() == 0.0) return {std::pow(z.real(), alpha), 0.0};
  return std::exp(alpha * std::log(z));
}

inline Complex frac_exp_scalar(Complex z, const FracExpParams& p) {
  if (z == Complex{0.0, 0.0} || p.t == 0.0) return {1.0, 0.0};
  return std::exp(-p.t * frac_power(z, p.alpha));
}

// Scalar functions understood by the dense kernel. Each provides its value and
// Taylor coefficients f^(k)(z) / k! at points off the branch cut.

namespace detail {

/// Coefficients of z^alpha about sigma != 0: binom(alpha, k) sigma^(alpha - k).
inline std::vector<Complex> power_taylor(Complex sigma, double alpha, std::size_t m) {
  std::vector<Complex> c(m + 1, Complex{0.0, 0.0});
  if (alpha == 1.0) {
    c[0] = sigma;
    if (m >= 1) c[1] = 1.0;
    return c;
  }
  if (sigma == Complex{0.0, 0.0}) {
    throw IllConditioned("Taylor expansion of z^alpha about the branch point");
  }
  double binom = 1.0;
  const Complex base = frac_power(sigma, alpha);
  Complex inv_pow{1.0, 0.0};
  for (std::size_t k = 0; k <= m; ++k) {
    if (k > 0) {
      binom *= (alpha - static_cast<double>(k) + 1.0) / static_cast<double>(k);
      inv_pow /= sigma;
    }
    c[k] = binom * base * inv_pow;
  }
  return c;
}

/// exp of a power series: a_0 = e^{b_0}, a_n = (1/n) sum_k k b_k a_{n-k}.
inline std::vector<Complex> exp_series(const std::vector<Complex>& b) {
  std::vector<Complex> a(b.size());
  a[0] = std::exp(b[0]);
  for (std::size_t n = 1; n < b.size(); ++n) {
    Complex s{0.0, 0.0};
    for (std::size_t k = 1; k <= n; ++k) s += static_cast<double>(k) * b[k] * a[n - k];
    a[n] = s / static_cast<double>(n);
  }
  return a;
}

}  // namespace detail

struct FracExpFunction {
  FracExpParams params;

  Complex value(Complex z) const { return frac_exp_scalar(z, params); }
  bool has_branch_cut() const { return params.alpha != 1.0 && params.t != 0.0; }

  std::vector<Complex> taylor(Complex sigma, std::size_t m) const {
    if (params.t == 0.0) {
      std::vector<Complex> c(m + 1, Complex{0.0, 0.0});
      c[0] = 1.0;
      return c;
    }
    auto g = detail::power_taylor(sigma, params.alpha, m);
    for (auto& x : g) x *= -params.t;
    return detail::exp_series(g);
  }
};

struct FracPowerFunction {
  double alpha = 0.5;

  Complex value(Complex z) const { return frac_power(z, alpha); }
  bool has_branch_cut() const { return alpha != 1.0; }

  std::vector<Complex> taylor(Complex sigma, std::size_t m) const {
    return detail::power_taylor(sigma, alpha, m);
  }
};

/// What to do with eigenvalues on the branch cut (-inf, 0).
///   reject         throw BranchCutError
///   clamp_to_zero  evaluate f there as f(0); meant for projections of a
///                  singular operator whose zero eigenvalue is approximated
///                  from the wrong side
enum class CutPolicy { reject, clamp_to_zero };

/// Diagnostics of one dense evaluation.
struct DenseFunctionReport {
  bool symmetric_route = false;
  Index clamped = 0;            ///< eigenvalues moved off the cut to 0
  Index largest_block = 0;      ///< largest eigenvalue cluster in the Schur form
  double discarded_imag = 0.0;  ///< max |Im| dropped, relative to the Frobenius norm of F
};

/// Eigenvalues closer than this (relative to their magnitude) share a block.
inline constexpr double kClusterTolerance = 1e-3;

namespace detail {

/// Eigenvalue cleanup: rounding-level values become exactly 0, values on the
/// negative real axis are rejected (or clamped) when f has a branch cut there.
inline Complex clean_eigenvalue(Complex lambda, double scale, bool branch_cut = true,
                                CutPolicy policy = CutPolicy::reject,
                                Index* clamped = nullptr) {
  const double snap = 1e-13 * scale;
  if (std::abs(lambda) <= snap) return {0.0, 0.0};
  if (branch_cut && lambda.real() < 0.0 && std::abs(lambda.imag()) <= 1e-12 * scale) {
    if (policy == CutPolicy::clamp_to_zero) {
      if (clamped) ++*clamped;
      return {0.0, 0.0};
    }
    throw BranchCutError("eigenvalue " + std::to_string(lambda.real()) +
                         " lies on the branch cut (-inf, 0)");
  }
  // Real up to rounding; keeps f(lambda) real near the branch point.
  if (std::abs(lambda.imag()) <= 1e-12 * scale) return {lambda.real(), 0.0};
  return lambda;
}

template <typename Fn>
DenseMatrix symmetric_function(const DenseMatrix& b, const Fn& fn, double scale,
                               CutPolicy policy, Index* clamped) {
  const DenseMatrix sym = 0.5 * (b + b.transpose());
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(sym);
  if (es.info() != Eigen::Success) {
    throw IllConditioned("symmetric eigensolver failed to converge");
  }
  Eigen::VectorXd fvals(b.rows());
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    const Complex lam = clean_eigenvalue({es.eigenvalues()(i), 0.0}, scale,
                                         fn.has_branch_cut(), policy, clamped);
    fvals(i) = fn.value(lam).real();
  }
  return es.eigenvectors() * fvals.asDiagonal() * es.eigenvectors().transpose();
}

/// Complex Schur form from a real one: each 2x2 block of the quasi-triangular
/// T is split by a rotation built from an eigenvector of the block.
inline void real_to_complex_schur(const DenseMatrix& tr, const DenseMatrix& ur,
                                  Eigen::MatrixXcd& t, Eigen::MatrixXcd& u) {
  const Eigen::Index n = tr.rows();
  t = tr.cast<Complex>();
  u = ur.cast<Complex>();
  for (Eigen::Index m = n - 1; m >= 1; --m) {
    if (tr(m, m - 1) == 0.0) continue;
    const double a = tr(m - 1, m - 1), b = tr(m - 1, m), c = tr(m, m - 1), d = tr(m, m);
    const Complex disc = std::sqrt(Complex(0.25 * (a - d) * (a - d) + b * c, 0.0));
    const Complex mu = 0.5 * (a + d) + disc - d;
    const double r = std::hypot(std::abs(mu), c);
    const Complex cs = mu / r;
    const double sn = c / r;
    // rows m-1, m by G = [conj(cs) sn; -sn cs]
    for (Eigen::Index j = m - 1; j < n; ++j) {
      const Complex x = t(m - 1, j), y = t(m, j);
      t(m - 1, j) = std::conj(cs) * x + sn * y;
      t(m, j) = -sn * x + cs * y;
    }
    // columns m-1, m by G^H
    for (Eigen::Index i = 0; i <= m; ++i) {
      const Complex x = t(i, m - 1), y = t(i, m);
      t(i, m - 1) = cs * x + sn * y;
      t(i, m) = -sn * x + std::conj(cs) * y;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const Complex x = u(i, m - 1), y = u(i, m);
      u(i, m - 1) = cs * x + sn * y;
      u(i, m) = -sn * x + std::conj(cs) * y;
    }
    t(m, m - 1) = 0.0;
  }
}

/// Swaps diagonal entries k and k+1 of the upper triangular T by a unitary
/// rotation, updating U so that U T U^H is unchanged.
inline void swap_schur(Eigen::MatrixXcd& t, Eigen::MatrixXcd& u, Eigen::Index k) {
  const Eigen::Index n = t.rows();
  const Complex f = t(k, k + 1);
  const Complex g = t(k + 1, k + 1) - t(k, k);
  const double d = std::hypot(std::abs(f), std::abs(g));
  if (d == 0.0) return;
  double c;
  Complex s;
  if (std::abs(f) == 0.0) {
    c = 0.0;
    s = std::conj(g) / std::abs(g);
  } else {
    const Complex phase = f / std::abs(f);
    c = std::abs(f) / d;
    s = phase * std::conj(g) / d;
  }
  // rows k, k+1 by G = [c s; -conj(s) c]
  for (Eigen::Index j = k; j < n; ++j) {
    const Complex x = t(k, j), y = t(k + 1, j);
    t(k, j) = c * x + s * y;
    t(k + 1, j) = c * y - std::conj(s) * x;
  }
  // columns k, k+1 by G^H
  for (Eigen::Index i = 0; i <= k + 1; ++i) {
    const Complex x = t(i, k), y = t(i, k + 1);
    t(i, k) = c * x + std::conj(s) * y;
    t(i, k + 1) = c * y - s * x;
  }
  t(k + 1, k) = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex x = u(i, k), y = u(i, k + 1);
    u(i, k) = c * x + std::conj(s) * y;
    u(i, k + 1) = c * y - s * x;
  }
}

/// Groups eigenvalues that are relatively close (transitively) and reorders
/// the Schur form so every group is contiguous. Returns block boundaries.
inline std::vector<Eigen::Index> cluster_schur(Eigen::MatrixXcd& t, Eigen::MatrixXcd& u) {
  const Eigen::Index n = t.rows();
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) parent[i] = i;
  const auto find = [&](Eigen::Index i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Complex a = t(i, i), b = t(j, j);
      if (std::abs(a - b) <= kClusterTolerance * std::max(std::abs(a), std::abs(b))) {
        parent[find(j)] = find(i);
      }
    }
  }
  // rank clusters by first appearance, then insertion-sort the diagonal
  std::vector<Eigen::Index> rank_of_root(static_cast<std::size_t>(n), -1);
  std::vector<Eigen::Index> rank(static_cast<std::size_t>(n));
  Eigen::Index next = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = find(i);
    if (rank_of_root[r] < 0) rank_of_root[r] = next++;
    rank[i] = rank_of_root[r];
  }
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index k = i; k > 0 && rank[k - 1] > rank[k]; --k) {
      swap_schur(t, u, k - 1);
      std::swap(rank[k - 1], rank[k]);
    }
  }
  std::vector<Eigen::Index> bounds{0};
  for (Eigen::Index i = 1; i < n; ++i) {
    if (rank[i] != rank[i - 1]) bounds.push_back(i);
  }
  bounds.push_back(n);
  return bounds;
}

/// f of one diagonal block by its Taylor series about the mean eigenvalue.
template <typename Fn>
Eigen::MatrixXcd block_function(const Eigen::MatrixXcd& t, const Fn& fn, double scale,
                                CutPolicy policy, Index* clamped) {
  const Eigen::Index p = t.rows();
  if (p == 1) {
    Eigen::MatrixXcd f(1, 1);
    f(0, 0) = fn.value(clean_eigenvalue(t(0, 0), scale, fn.has_branch_cut(), policy, clamped));
    return f;
  }
  const Complex sigma = t.diagonal().mean();
  clean_eigenvalue(sigma, scale, fn.has_branch_cut());
  const Eigen::MatrixXcd m = t - sigma * Eigen::MatrixXcd::Identity(p, p);
  const std::size_t max_terms = static_cast<std::size_t>(p) + 80;
  const std::vector<Complex> a = fn.taylor(sigma, max_terms);

  Eigen::MatrixXcd f = a[0] * Eigen::MatrixXcd::Identity(p, p);
  Eigen::MatrixXcd power = Eigen::MatrixXcd::Identity(p, p);
  int small_terms = 0;
  for (std::size_t k = 1; k <= max_terms; ++k) {
    power = power * m;
    const Eigen::MatrixXcd term = a[k] * power;
    if (!term.allFinite()) break;
    f += term;
    const double tn = term.cwiseAbs().maxCoeff();
    if (k >= static_cast<std::size_t>(p) &&
        tn <= std::numeric_limits<double>::epsilon() * f.cwiseAbs().maxCoeff()) {
      if (++small_terms == 2) return f;
    } else {
      small_terms = 0;
    }
  }
  throw IllConditioned("Taylor series of a clustered eigenvalue block did not converge");
}

/// Block Parlett recurrence on a clustered Schur form:
///   T_ii F_ij - F_ij T_jj = F_ii T_ij - T_ij F_jj + sum_k (F_ik T_kj - T_ik F_kj)
template <typename Fn>
Eigen::MatrixXcd block_parlett(const Eigen::MatrixXcd& t, const std::vector<Eigen::Index>& bounds,
                               const Fn& fn, double scale, CutPolicy policy, Index* clamped) {
  const Eigen::Index n = t.rows();
  const std::size_t nb = bounds.size() - 1;
  Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(n, n);
  const auto start = [&](std::size_t b) { return bounds[b]; };
  const auto len = [&](std::size_t b) { return bounds[b + 1] - bounds[b]; };

  for (std::size_t b = 0; b < nb; ++b) {
    f.block(start(b), start(b), len(b), len(b)) =
        block_function(t.block(start(b), start(b), len(b), len(b)), fn, scale, policy, clamped);
  }
  if (static_cast<Eigen::Index>(nb) == n) {
    // all blocks 1x1: scalar recurrence, one superdiagonal column at a time
    for (Eigen::Index j = 1; j < n; ++j) {
      for (Eigen::Index i = j; i-- > 0;) {
        Complex c = t(i, j) * (f(i, i) - f(j, j));
        for (Eigen::Index k = i + 1; k < j; ++k) c += f(i, k) * t(k, j) - t(i, k) * f(k, j);
        f(i, j) = c / (t(i, i) - t(j, j));
      }
    }
    return f;
  }
  for (std::size_t j = 1; j < nb; ++j) {
    const Eigen::Index sj = start(j), lj = len(j);
    const Eigen::MatrixXcd tjj = t.block(sj, sj, lj, lj);
    for (std::size_t i = j; i-- > 0;) {
      const Eigen::Index si = start(i), li = len(i);
      Eigen::MatrixXcd c = f.block(si, si, li, li) * t.block(si, sj, li, lj) -
                           t.block(si, sj, li, lj) * f.block(sj, sj, lj, lj);
      for (std::size_t k = i + 1; k < j; ++k) {
        const Eigen::Index sk = start(k), lk = len(k);
        c += f.block(si, sk, li, lk) * t.block(sk, sj, lk, lj) -
             t.block(si, sk, li, lk) * f.block(sk, sj, lk, lj);
      }
      // Sylvester T_ii X - X T_jj = C, column by column
      const Eigen::MatrixXcd tii = t.block(si, si, li, li);
      Eigen::MatrixXcd x(li, lj);
      for (Eigen::Index col = 0; col < lj; ++col) {
        Eigen::VectorXcd rhs = c.col(col);
        for (Eigen::Index l = 0; l < col; ++l) rhs += tjj(l, col) * x.col(l);
        Eigen::MatrixXcd shifted = tii;
        shifted.diagonal().array() -= tjj(col, col);
        x.col(col) = shifted.triangularView<Eigen::Upper>().solve(rhs);
      }
      f.block(si, sj, li, lj) = x;
    }
  }
  return f;
}

}  // namespace detail

/**
 * Dense primary matrix function f(B) for real B with spectrum off the branch
 * cut.
 *
 * Symmetric inputs use a symmetric eigendecomposition. Otherwise B is
 * reduced to complex Schur form B = U T U^H, relatively close eigenvalues are
 * gathered into contiguous blocks by unitary swaps, each block is evaluated
 * by a Taylor series about its mean and the blocks are coupled through the
 * block Parlett recurrence. Defective and repeated eigenvalues are therefore
 * handled without perturbing B. Eigenvalues of size <= 1e-13 ||B||_F are
 * treated as exact zeros.
 */
template <typename Fn>
DenseMatrix dense_function(const DenseMatrix& b, const Fn& fn,
                           DenseFunctionReport* report = nullptr,
                           CutPolicy policy = CutPolicy::reject) {
  if (b.rows() != b.cols()) throw InvalidArgument("dense_function: matrix must be square");
  if (!b.allFinite()) throw InvalidArgument("dense_function: non-finite entries");
  DenseFunctionReport local;
  DenseFunctionReport& rep = report ? *report : local;
  rep = {};

  const Eigen::Index n = b.rows();
  if (n == 0) return b;
  const double scale = b.norm();
  if (scale == 0.0) {
    rep.largest_block = static_cast<Index>(n);
    return DenseMatrix::Identity(n, n) * fn.value({0.0, 0.0}).real();
  }

  const double asym = (b - b.transpose()).cwiseAbs().maxCoeff();
  if (asym <= 1e-13 * b.cwiseAbs().maxCoeff()) {
    rep.symmetric_route = true;
    return detail::symmetric_function(b, fn, scale, policy, &rep.clamped);
  }

  Eigen::RealSchur<DenseMatrix> schur(b);
  if (schur.info() != Eigen::Success) {
    throw IllConditioned("Schur decomposition failed to converge");
  }
  Eigen::MatrixXcd t, u;
  detail::real_to_complex_schur(schur.matrixT(), schur.matrixU(), t, u);
  t.triangularView<Eigen::StrictlyLower>().setZero();
  const std::vector<Eigen::Index> bounds = detail::cluster_schur(t, u);
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    rep.largest_block = std::max(rep.largest_block, static_cast<Index>(bounds[i + 1] - bounds[i]));
  }
  const Eigen::MatrixXcd ft = detail::block_parlett(t, bounds, fn, scale, policy, &rep.clamped);
  const Eigen::MatrixXcd full = u * ft * u.adjoint();
  if (!full.allFinite()) {
    throw IllConditioned("matrix function is not finite");
  }
  const double fnorm = full.norm();
  const double imag = full.imag().cwiseAbs().maxCoeff();
  rep.discarded_imag = fnorm > 0.0 ? imag / fnorm : 0.0;
  if (rep.discarded_imag > 1e-12) {
    char buf[96];
    std::snprintf(buf, sizeof buf,
                  "matrix function of a real matrix has imaginary part %.3e (relative)",
                  rep.discarded_imag);
    throw IllConditioned(buf);
  }
  return full.real();
}

inline DenseMatrix dense_frac_exp(const DenseMatrix& b, const FracExpParams& p,
                                  DenseFunctionReport* report = nullptr,
                                  CutPolicy policy = CutPolicy::reject) {
  p.validate();
  if (p.t == 0.0) {
    if (b.rows() != b.cols()) throw InvalidArgument("dense_function: matrix must be square");
    if (report) *report = {};
    return DenseMatrix::Identity(b.rows(), b.cols());
  }
  return dense_function(b, FracExpFunction{p}, report, policy);
}

inline DenseMatrix to_dense(const SparseMatrix& a) {
  DenseMatrix d = DenseMatrix::Zero(static_cast<Eigen::Index>(a.rows()),
                                    static_cast<Eigen::Index>(a.cols()));
  for (Index i = 0; i < a.rows(); ++i) {
    const auto cols = a.row_cols(i);
    const auto vals = a.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cols[p])) = vals[p];
    }
  }
  return d;
}

inline constexpr Index kDefaultDenseLimit = 1500;

/// u(t) = f(L^T) u0 by densifying L^T; the small-graph oracle.
inline Vector dense_reference(const LaplacianSystem& sys, std::span<const double> u0,
                              const FracExpParams& p,
                              Index dense_limit = kDefaultDenseLimit) {
  if (sys.n > dense_limit) {
    throw InvalidArgument("dense_reference: n = " + std::to_string(sys.n) +
                          " exceeds the dense limit " + std::to_string(dense_limit));
  }
  if (u0.size() != sys.n) throw DimensionMismatch("dense_reference: u0 has wrong length");
  const DenseMatrix f = dense_frac_exp(to_dense(sys.Lt), p);
  const Eigen::Map<const Eigen::VectorXd> u(u0.data(), static_cast<Eigen::Index>(u0.size()));
  const Eigen::VectorXd y = f * u;
  return Vector(y.data(), y.data() + y.size());
}

}  // namespace fracdiff
