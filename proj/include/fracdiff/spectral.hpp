#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "fracdiff/desingularize.hpp"
#include "fracdiff/direct_solver.hpp"
#include "fracdiff/laplacian.hpp"
#include "fracdiff/poles.hpp"
#include "fracdiff/sparse.hpp"

namespace fracdiff {

struct EigenEstimate {
  double value = 0.0;
  Index iterations = 0;
  bool converged = false;
};

namespace detail {

/// Power iteration x <- step(x) / ||step(x)||. The magnitude estimate is the
/// geometric mean of two consecutive growth factors, which stays stable when
/// the dominant eigenvalues form a complex pair.
template <typename Step>
EigenEstimate power_magnitude(Vector x, Step&& step, double tol, Index max_iter) {
  EigenEstimate est;
  double prev_growth = 0.0, prev_est = 0.0;
  for (Index it = 1; it <= max_iter; ++it) {
    Vector y = step(x);
    const double growth = norm2(y);
    est.iterations = it;
    if (growth == 0.0) {
      est.value = 0.0;
      return est;
    }
    for (double& v : y) v /= growth;
    x = std::move(y);
    if (it >= 2) {
      const double cur = std::sqrt(prev_growth * growth);
      est.value = cur;
      if (it >= 3 && std::abs(cur - prev_est) <= tol * cur) {
        est.converged = true;
        return est;
      }
      prev_est = cur;
    }
    prev_growth = growth;
  }
  return est;
}

}  // namespace detail

/// |lambda_n| by power iteration on L from 1/sqrt(n) + 1e-3 e_1.
inline EigenEstimate estimate_lambda_max(const LaplacianSystem& sys, double tol = 1e-10,
                                         Index max_iter = 100000) {
  if (sys.n < 2) throw InvalidArgument("estimate_lambda_max: need n >= 2");
  Vector x(sys.n, 1.0 / std::sqrt(static_cast<double>(sys.n)));
  x[0] += 1e-3;
  const double nx = norm2(x);
  for (double& v : x) v /= nx;
  return detail::power_magnitude(
      std::move(x), [&](const Vector& v) { return spmv(sys.L, v); }, tol, max_iter);
}

/**
 * |lambda_2| by inverse iteration on L^T + theta z 1^T with theta = lambdaN,
 * whose spectrum is {theta} together with the nonzero Laplacian eigenvalues.
 * Each step solves with the shift -eps (eps = 1e-8 lambdaN) through the
 * cancellation-free rank-one formula.
 */
inline EigenEstimate estimate_lambda_2(const LaplacianSystem& sys, double lambdaN,
                                       double tol = 1e-10, Index max_iter = 100000,
                                       Ordering ordering = Ordering::rcm) {
  if (sys.n < 2) throw InvalidArgument("estimate_lambda_2: need n >= 2");
  if (!sys.z) throw InvalidArgument("estimate_lambda_2: left null vector z missing");
  if (!(lambdaN > 0.0)) throw InvalidArgument("estimate_lambda_2: lambdaN must be positive");
  const double theta = lambdaN;
  const double eps = 1e-8 * lambdaN;
  const LUFactors f = lu_factorize(sys.Lt, -eps, ordering);
  const Vector& z = *sys.z;

  std::mt19937_64 rng(20240521);
  Vector x(sys.n);
  for (double& v : x) v = 0.5 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
  const double nx = norm2(x);
  for (double& v : x) v /= nx;

  EigenEstimate inv = detail::power_magnitude(
      std::move(x), [&](const Vector& v) { return shifted_solve_safe(f, z, theta, v); },
      tol, max_iter);
  EigenEstimate est = inv;
  est.value = inv.value > 0.0 ? 1.0 / inv.value - eps : 0.0;
  est.value = std::min(est.value, lambdaN);
  return est;
}

/// Both extents; fills the caches on `sys` that are still empty.
inline SpectralExtent estimate_extents(LaplacianSystem& sys, double tol = 1e-10,
                                       Index max_iter = 100000,
                                       Ordering ordering = Ordering::rcm) {
  SpectralExtent e;
  e.converged = true;
  if (!sys.lambdaN) {
    const auto hi = estimate_lambda_max(sys, tol, max_iter);
    sys.lambdaN = hi.value;
    e.iterations_used += hi.iterations;
    e.converged = e.converged && hi.converged;
  }
  if (!sys.lambda2) {
    ensure_null_vector(sys, ordering);
    const auto lo = estimate_lambda_2(sys, *sys.lambdaN, tol, max_iter, ordering);
    sys.lambda2 = lo.value;
    e.iterations_used += lo.iterations;
    e.converged = e.converged && lo.converged;
  }
  e.lambda2_abs = *sys.lambda2;
  e.lambdaN_abs = *sys.lambdaN;
  return e;
}

/// Extents from the caches on `sys`, if both are present.
inline std::optional<SpectralExtent> cached_extents(const LaplacianSystem& sys) {
  if (!sys.lambda2 || !sys.lambdaN) return std::nullopt;
  return SpectralExtent{*sys.lambda2, *sys.lambdaN, 0, true};
}

}  // namespace fracdiff
