#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fracdiff/error.hpp"
#include "fracdiff/matfun.hpp"
#include "fracdiff/poles.hpp"
#include "fracdiff/sparse.hpp"

namespace fracdiff {

/// Matrix-free operator: v -> A v and (xi, w) -> (A - xi I)^{-1} w.
///
/// `deflate`, when set, projects a vector onto an A-invariant subspace that
/// the iteration must not leave; it is applied to the start vector and to
/// every new direction so rounding cannot reintroduce the removed part.
struct LinearOperator {
  Index dimension = 0;
  std::function<Vector(std::span<const double>)> apply;
  std::function<Vector(double, std::span<const double>)> shifted_solve;
  std::function<void(std::span<double>)> deflate;
  /// Applied when f(B_k) meets a Ritz value on the branch cut.
  CutPolicy cut_policy = CutPolicy::reject;
};

/**
 * Rational Arnoldi state: orthonormal basis V_k, the products A V_k, the
 * orthogonalization coefficients and the projected matrix B_k = V_k^T A V_k.
 */
struct KrylovState {
  std::vector<Vector> V;
  std::vector<Vector> AV;
  std::vector<Vector> h;  ///< h[j] = coefficients of step j (length j + 2)
  DenseMatrix B;
  double beta = 0.0;  ///< ||b||_2
  bool breakdown = false;

  Index k() const noexcept { return V.size(); }
};

inline constexpr double kBreakdownTolerance = 1e-14;

inline KrylovState start_krylov(const LinearOperator& op, std::span<const double> b) {
  if (b.size() != op.dimension) throw DimensionMismatch("krylov: b has wrong length");
  KrylovState s;
  s.beta = norm2(b);
  if (!(s.beta > 0.0)) throw InvalidArgument("krylov: starting vector is zero");
  Vector v(b.begin(), b.end());
  if (op.deflate) {
    op.deflate(v);
    s.beta = norm2(v);
    if (!(s.beta > 0.0)) throw InvalidArgument("krylov: starting vector is zero");
  }
  for (double& x : v) x /= s.beta;
  s.AV.push_back(op.apply(v));
  s.B.resize(1, 1);
  s.B(0, 0) = dot(v, s.AV[0]);
  s.V.push_back(std::move(v));
  return s;
}

/**
 * One rational Arnoldi step with continuation vector v_k:
 *   w = (I - A/xi)^{-1} A v_k  (= -xi (A - xi I)^{-1} A v_k),   or A v_k if xi = inf,
 * followed by modified Gram-Schmidt with one reorthogonalization pass.
 * Sets `breakdown` when the new direction vanishes (invariant subspace) or the
 * basis already spans the whole space.
 */
inline void rational_arnoldi_step(KrylovState& s, const LinearOperator& op, double pole) {
  if (s.breakdown) throw InvalidArgument("rational_arnoldi_step: basis already broke down");
  if (s.V.empty()) throw InvalidArgument("rational_arnoldi_step: state not started");
  const Index k = s.k();

  Vector w;
  if (std::isinf(pole)) {
    w = s.AV.back();
  } else {
    if (!(pole < 0.0)) throw InvalidArgument("finite poles must be negative");
    w = op.shifted_solve(pole, s.AV.back());
    for (double& x : w) x *= -pole;
  }
  const double w_norm = norm2(w);

  Vector coeff(k + 1, 0.0);
  for (int pass = 0; pass < 2; ++pass) {
    for (Index i = 0; i < k; ++i) {
      const double hij = dot(w, s.V[i]);
      coeff[i] += hij;
      axpy(-hij, s.V[i], w);
    }
  }
  if (op.deflate) op.deflate(w);
  const double h_next = norm2(w);
  coeff[k] = h_next;
  s.h.push_back(std::move(coeff));

  if (w_norm == 0.0 || h_next <= kBreakdownTolerance * w_norm || k >= op.dimension) {
    s.breakdown = true;
    return;
  }
  for (double& x : w) x /= h_next;
  Vector aw = op.apply(w);

  const auto ke = static_cast<Eigen::Index>(k);
  s.B.conservativeResize(ke + 1, ke + 1);
  for (Index i = 0; i < k; ++i) {
    s.B(static_cast<Eigen::Index>(i), ke) = dot(s.V[i], aw);
    s.B(ke, static_cast<Eigen::Index>(i)) = dot(w, s.AV[i]);
  }
  s.B(ke, ke) = dot(w, aw);
  s.V.push_back(std::move(w));
  s.AV.push_back(std::move(aw));
}

/// y_k = ||b|| V_k f(B_k) e_1.
inline Vector krylov_iterate(const KrylovState& s, const FracExpParams& p,
                             CutPolicy policy = CutPolicy::reject) {
  const DenseMatrix f = dense_frac_exp(s.B, p, nullptr, policy);
  const Index n = s.V.front().size();
  Vector y(n, 0.0);
  for (Index j = 0; j < s.k(); ++j) {
    axpy(s.beta * f(static_cast<Eigen::Index>(j), 0), s.V[j], y);
  }
  return y;
}

struct StoppingRule {
  Index max_k = 50;
  /// Stop once ||y_k - y_{k-1}||_2 <= tol; 0 disables the test.
  double tol = 0.0;
  bool keep_history = true;
  /// Only evaluate the final iterate (ignored when tol > 0).
  bool final_only = false;
};

struct KrylovResult {
  Vector y;
  std::vector<Vector> iterates;  ///< y_1, y_2, ... when history is kept
  Index k = 0;
  bool breakdown = false;
  bool converged = false;  ///< consecutive-difference test satisfied
};

/// Called with (k, y_k) right after each iterate is formed.
using IterateObserver = std::function<void(Index, const Vector&)>;

/**
 * Rational Krylov approximation of f(A) b with f(z) = exp(-t z^alpha).
 *
 * Iterates until the stopping rule fires or the subspace becomes invariant,
 * in which case the last iterate is exact.
 */
inline KrylovResult krylov_fAb(const LinearOperator& op, std::span<const double> b,
                               const FracExpParams& p, const PoleSequence& poles,
                               const StoppingRule& stop,
                               const IterateObserver& observer = {}) {
  p.validate();
  if (stop.max_k == 0) throw InvalidArgument("krylov: max_k must be positive");
  KrylovState s = start_krylov(op, b);
  KrylovResult r;
  const bool final_only = stop.final_only && stop.tol <= 0.0 && !observer;

  for (;;) {
    const Index k = s.k();
    if (!final_only) {
      Vector y = krylov_iterate(s, p, op.cut_policy);
      if (observer) observer(k, y);
      if (k > 1 && stop.tol > 0.0 && norm2(subtract(y, r.y)) <= stop.tol) {
        r.converged = true;
      }
      if (stop.keep_history) r.iterates.push_back(y);
      r.y = std::move(y);
    }
    r.k = k;
    if (r.converged || k >= stop.max_k) break;
    rational_arnoldi_step(s, op, poles(k));
    if (s.breakdown) {
      r.breakdown = true;
      break;
    }
  }
  if (final_only) {
    r.y = krylov_iterate(s, p, op.cut_policy);
    if (stop.keep_history) r.iterates.push_back(r.y);
  }
  return r;
}

}  // namespace fracdiff
