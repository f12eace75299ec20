#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <utility>

#include "fracdiff/direct_solver.hpp"
#include "fracdiff/error.hpp"
#include "fracdiff/krylov.hpp"
#include "fracdiff/laplacian.hpp"
#include "fracdiff/matfun.hpp"
#include "fracdiff/sparse.hpp"

namespace fracdiff {

/**
 * Solves (L^T - xi I) x = w, keeping the factorization of the most recent
 * pole. Shift-and-invert runs therefore factor once; EDS runs factor once per
 * pole. The referenced system must outlive the solver.
 */
class ShiftedLaplacianSolver {
public:
  explicit ShiftedLaplacianSolver(const LaplacianSystem& sys,
                                  Ordering ordering = Ordering::rcm)
      : sys_{&sys}, ordering_{ordering} {}

  const LUFactors& factors(double xi) {
    if (!(xi < 0.0)) throw InvalidArgument("shifted solves need a negative pole");
    if (!cached_ || cached_->shift != xi) {
      cached_ = lu_factorize(sys_->Lt, xi, ordering_);
      ++factorizations_;
    }
    return *cached_;
  }

  Vector solve(double xi, std::span<const double> w) { return fracdiff::solve(factors(xi), w); }

  Index factorizations() const noexcept { return factorizations_; }
  const LaplacianSystem& system() const noexcept { return *sys_; }

private:
  const LaplacianSystem* sys_;
  Ordering ordering_;
  std::optional<LUFactors> cached_;
  Index factorizations_ = 0;
};

/// Krylov operator A = L^T.
///
/// For digraphs the field of values of L^T usually crosses the negative real
/// axis, so the Ritz value that approximates the zero eigenvalue can land on
/// the branch cut; it is then evaluated as f(0).
inline LinearOperator laplacian_operator(const LaplacianSystem& sys,
                                         Ordering ordering = Ordering::rcm) {
  auto solver = std::make_shared<ShiftedLaplacianSolver>(sys, ordering);
  LinearOperator op;
  op.dimension = sys.n;
  op.cut_policy = CutPolicy::clamp_to_zero;
  op.apply = [&sys](std::span<const double> v) { return spmv(sys.Lt, v); };
  op.shifted_solve = [solver](double xi, std::span<const double> w) {
    return solver->solve(xi, w);
  };
  return op;
}

/// L^T restricted to the invariant subspace 1^perp, for start vectors with
/// zero sum. Each new direction has its mean removed, which is exact
/// arithmetic's no-op but keeps the null direction z out of the basis.
inline LinearOperator implicit_operator(const LaplacianSystem& sys,
                                        Ordering ordering = Ordering::rcm) {
  LinearOperator op = laplacian_operator(sys, ordering);
  op.cut_policy = CutPolicy::reject;
  op.deflate = [](std::span<double> v) {
    const double m = sum(v) / static_cast<double>(v.size());
    for (double& x : v) x -= m;
  };
  return op;
}

// ---------------------------------------------------------------------------
// Rank-one shift  L^T + theta z 1^T
// ---------------------------------------------------------------------------

/**
 * x = (L^T + theta z 1^T - xi I)^{-1} w without cancellation:
 *   (L^T - xi I) psi = w - (1^T w) z,   x = psi + (1^T w)/(theta - xi) z.
 * `f` must factor L^T - xi I (f.shift == xi).
 */
inline Vector shifted_solve_safe(const LUFactors& f, std::span<const double> z,
                                 double theta, std::span<const double> w) {
  const double xi = f.shift;
  if (!(xi < 0.0)) throw InvalidArgument("shifted_solve_safe: pole must be negative");
  if (z.size() != w.size()) throw DimensionMismatch("shifted_solve_safe: size mismatch");
  const double s = sum(w);
  Vector rhs(w.begin(), w.end());
  axpy(-s, z, rhs);
  Vector x = solve(f, rhs);
  axpy(s / (theta - xi), z, x);
  return x;
}

inline Vector shifted_solve_safe(const LaplacianSystem& sys, std::span<const double> z,
                                 double theta, double xi, std::span<const double> w,
                                 Ordering ordering = Ordering::rcm) {
  if (!(xi < 0.0)) throw InvalidArgument("shifted_solve_safe: pole must be negative");
  return shifted_solve_safe(lu_factorize(sys.Lt, xi, ordering), z, theta, w);
}

/// Operator L^T + theta z 1^T together with the map back to f(L^T) b.
struct RankOneShift {
  LinearOperator op;
  Vector z;
  double theta = 1.0;

  /// f(L^T) b = f(L^T + theta z 1^T) b + [f(0) - f(theta)] (1^T b) z
  Vector recover(std::span<const double> shifted_result, std::span<const double> b,
                 const FracExpParams& p) const {
    const double c =
        (frac_exp_scalar(0.0, p) - frac_exp_scalar(theta, p)).real() * sum(b);
    Vector y(shifted_result.begin(), shifted_result.end());
    axpy(c, z, y);
    return y;
  }
};

inline RankOneShift rank_one_operator(const LaplacianSystem& sys, double theta,
                                      Ordering ordering = Ordering::rcm) {
  if (!sys.z) throw InvalidArgument("rank-one shift needs the left null vector z");
  if (!(theta > 0.0)) throw InvalidArgument("theta must be positive");
  RankOneShift r;
  r.z = *sys.z;
  r.theta = theta;
  auto solver = std::make_shared<ShiftedLaplacianSolver>(sys, ordering);
  auto z = std::make_shared<const Vector>(*sys.z);
  r.op.dimension = sys.n;
  r.op.apply = [&sys, z, theta](std::span<const double> v) {
    Vector y = spmv(sys.Lt, v);
    axpy(theta * sum(v), *z, y);
    return y;
  };
  r.op.shifted_solve = [solver, z, theta](double xi, std::span<const double> w) {
    return shifted_solve_safe(solver->factors(xi), *z, theta, w);
  };
  return r;
}

// ---------------------------------------------------------------------------
// Projection onto span{1}^perp
// ---------------------------------------------------------------------------

namespace detail {
inline double projection_s(Index n) {
  const double dn = static_cast<double>(n);
  return (1.0 + 1.0 / std::sqrt(dn)) / (1.0 - dn);
}
}  // namespace detail

/// Q u for the n x (n-1) orthonormal basis Q of span{1}^perp, O(n).
inline Vector apply_Q(std::span<const double> u) {
  const Index n = u.size() + 1;
  if (n < 2) throw InvalidArgument("apply_Q: need n >= 2");
  const double s = detail::projection_s(n);
  const double total = sum(u);
  Vector v(n);
  v[0] = total / std::sqrt(static_cast<double>(n));
  for (Index i = 1; i < n; ++i) v[i] = s * total + u[i - 1];
  return v;
}

/// Q^T v, O(n).
inline Vector apply_Qt(std::span<const double> v) {
  const Index n = v.size();
  if (n < 2) throw InvalidArgument("apply_Qt: need n >= 2");
  const double s = detail::projection_s(n);
  double tail = 0.0;
  for (Index j = 1; j < n; ++j) tail += v[j];
  const double c = v[0] / std::sqrt(static_cast<double>(n)) + s * tail;
  Vector u(n - 1);
  for (Index i = 0; i + 1 < n; ++i) u[i] = c + v[i + 1];
  return u;
}

/// Operator Q^T L^T Q of dimension n - 1; shifted solves reduce to L^T.
inline LinearOperator projected_operator(const LaplacianSystem& sys,
                                         Ordering ordering = Ordering::rcm) {
  if (sys.n < 2) throw InvalidArgument("projected operator needs n >= 2");
  auto solver = std::make_shared<ShiftedLaplacianSolver>(sys, ordering);
  LinearOperator op;
  op.dimension = sys.n - 1;
  op.apply = [&sys](std::span<const double> u) {
    return apply_Qt(spmv(sys.Lt, apply_Q(u)));
  };
  op.shifted_solve = [solver](double xi, std::span<const double> u) {
    return apply_Qt(solver->solve(xi, apply_Q(u)));
  };
  return op;
}

/// u0 = w + beta z with beta = 1^T u0 and 1^T w = 0.
inline std::pair<Vector, double> split_b(std::span<const double> u0,
                                         std::span<const double> z) {
  if (u0.size() != z.size()) throw DimensionMismatch("split_b: size mismatch");
  const double beta = sum(u0);
  Vector w(u0.begin(), u0.end());
  axpy(-beta, z, w);
  return {std::move(w), beta};
}

/// y - (1^T y - 1) z
inline Vector correct_sum(std::span<const double> y, std::span<const double> z) {
  if (y.size() != z.size()) throw DimensionMismatch("correct_sum: size mismatch");
  Vector out(y.begin(), y.end());
  axpy(-(sum(y) - 1.0), z, out);
  return out;
}

}  // namespace fracdiff
