#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fracdiff/desingularize.hpp"
#include "fracdiff/direct_solver.hpp"
#include "fracdiff/error.hpp"
#include "fracdiff/krylov.hpp"
#include "fracdiff/laplacian.hpp"
#include "fracdiff/matfun.hpp"
#include "fracdiff/poles.hpp"
#include "fracdiff/spectral.hpp"

namespace fracdiff {

enum class Desing { none_with_correction, rank_one, projected, implicit };

inline constexpr std::string_view to_string(Desing d) {
  switch (d) {
    case Desing::none_with_correction: return "none";
    case Desing::rank_one: return "rank1";
    case Desing::projected: return "proj";
    case Desing::implicit: return "implicit";
  }
  return "?";
}

inline Desing parse_desing(std::string_view s) {
  if (s == "none") return Desing::none_with_correction;
  if (s == "rank1") return Desing::rank_one;
  if (s == "proj") return Desing::projected;
  if (s == "implicit") return Desing::implicit;
  throw InvalidArgument("unknown desingularization '" + std::string(s) + "'");
}

inline constexpr PoleKind kAllPoleKinds[] = {PoleKind::polynomial, PoleKind::si_geomean,
                                             PoleKind::si_time, PoleKind::eds};
inline constexpr Desing kAllDesings[] = {Desing::none_with_correction, Desing::rank_one,
                                         Desing::projected, Desing::implicit};

struct MethodConfig {
  PoleKind pole_kind = PoleKind::eds;
  Desing desing = Desing::implicit;
  double theta = 1.0;
  double tol = 0.0;
  Index max_k = 50;
  Index eds_seed = 0;
  Ordering ordering = Ordering::rcm;
  bool final_only = false;

  std::string label() const {
    return std::string(to_string(pole_kind)) + "/" + std::string(to_string(desing));
  }
};

struct DiffusionResult {
  Vector u;                           ///< final approximation of u(t)
  std::vector<Vector> iterates;       ///< post-processed y_k, k = 1, 2, ...
  std::vector<Vector> raw_iterates;   ///< uncorrected y_k (none mode only)
  std::vector<double> seconds;        ///< wall time at each iterate
  Index k = 0;
  bool breakdown = false;
  bool converged = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline Vector checked_initial_vector(std::span<const double> u0, Index n,
                                     std::vector<std::string>& warnings) {
  if (u0.size() != n) throw DimensionMismatch("u0 has wrong length");
  for (double v : u0) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument("u0 must be a nonnegative finite vector");
    }
  }
  const double total = sum(u0);
  if (total == 0.0) throw InvalidArgument("u0 is zero");
  Vector u(u0.begin(), u0.end());
  if (std::abs(total - 1.0) > 1e-14) {
    warnings.push_back("u0 sums to " + std::to_string(total) + "; normalized");
    for (double& v : u) v /= total;
  }
  return u;
}

}  // namespace detail

/**
 * u(t) = f(L^T) u0, f(z) = exp(-t z^alpha), by a rational Krylov method.
 *
 *  none      Krylov on L^T from u0, each iterate corrected to unit sum
 *  rank1     Krylov on L^T + theta z 1^T, shifted back by [f(0) - f(theta)] z
 *  proj      Krylov on Q^T L^T Q from Q^T w, lifted as Q y + beta z
 *  implicit  Krylov on L^T from w = u0 - beta z, plus beta z
 *
 * z is computed on demand; spectral extents must already be cached on `sys`
 * for the pole kinds that need them.
 */
inline DiffusionResult solve_fractional_diffusion(LaplacianSystem& sys,
                                                  std::span<const double> u0,
                                                  const FracExpParams& p,
                                                  const MethodConfig& cfg) {
  p.validate();
  DiffusionResult res;
  const Vector u = detail::checked_initial_vector(u0, sys.n, res.warnings);
  const PoleSequence poles = pole_sequence(cfg.pole_kind, cached_extents(sys), p, cfg.eds_seed);
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  if (p.t == 0.0) {
    // f = 1 identically; u(0) = u0 without rounding.
    res.u = u;
    res.k = 1;
    res.breakdown = false;
    res.converged = true;
    if (!cfg.final_only) {
      res.iterates.push_back(u);
      if (cfg.desing == Desing::none_with_correction) res.raw_iterates.push_back(u);
      res.seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    }
    return res;
  }
  const Vector& z = ensure_null_vector(sys, cfg.ordering);

  StoppingRule stop;
  stop.max_k = cfg.max_k;
  stop.tol = cfg.tol;
  stop.keep_history = !cfg.final_only;
  stop.final_only = cfg.final_only;

  IterateObserver observer;
  if (!cfg.final_only) {
    observer = [&](Index, const Vector&) {
      res.seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    };
  }

  std::function<Vector(const Vector&)> post;
  KrylovResult kr;
  switch (cfg.desing) {
    case Desing::none_with_correction: {
      kr = krylov_fAb(laplacian_operator(sys, cfg.ordering), u, p, poles, stop, observer);
      post = [&](const Vector& y) { return correct_sum(y, z); };
      res.raw_iterates = kr.iterates;
      break;
    }
    case Desing::rank_one: {
      const RankOneShift r1 = rank_one_operator(sys, cfg.theta, cfg.ordering);
      kr = krylov_fAb(r1.op, u, p, poles, stop, observer);
      const double c = (frac_exp_scalar(0.0, p) - frac_exp_scalar(cfg.theta, p)).real() *
                       sum(u);
      post = [&z, c](const Vector& y) {
        Vector out = y;
        axpy(c, z, out);
        return out;
      };
      break;
    }
    case Desing::projected:
    case Desing::implicit: {
      auto [w, beta] = split_b(u, z);
      if (norm2(w) <= 1e-15 * norm2(u)) {
        // u0 is already stationary.
        Vector y = z;
        for (double& v : y) v *= beta;
        res.u = y;
        res.k = 1;
        res.breakdown = true;
        res.converged = true;
        if (!cfg.final_only) {
          res.iterates.push_back(y);
          res.seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
        }
        return res;
      }
      if (cfg.desing == Desing::projected) {
        kr = krylov_fAb(projected_operator(sys, cfg.ordering), apply_Qt(w), p, poles, stop,
                        observer);
        post = [&z, beta = beta](const Vector& y) {
          Vector out = apply_Q(y);
          axpy(beta, z, out);
          return out;
        };
      } else {
        kr = krylov_fAb(implicit_operator(sys, cfg.ordering), w, p, poles, stop, observer);
        post = [&z, beta = beta](const Vector& y) {
          Vector out = y;
          axpy(beta, z, out);
          return out;
        };
      }
      break;
    }
  }

  res.k = kr.k;
  res.breakdown = kr.breakdown;
  res.converged = kr.converged;
  res.u = post(kr.y);
  res.iterates.reserve(kr.iterates.size());
  for (const auto& y : kr.iterates) res.iterates.push_back(post(y));
  return res;
}

// ---------------------------------------------------------------------------
// Convergence studies
// ---------------------------------------------------------------------------

struct ConvergenceRecord {
  std::string method;
  Index k = 0;
  double rel_error = 0.0;
  double sum_dev = 0.0;
  double seconds = 0.0;
};

enum class ReferenceKind { dense, eds_implicit_refined };

struct StudyResult {
  std::vector<ConvergenceRecord> records;
  Vector reference;
  double setup_seconds = 0.0;  ///< null vector and spectral estimates
  std::vector<std::string> warnings;
};

inline constexpr double kReferenceTolerance = 1e-14;
inline constexpr Index kReferenceMaxK = 400;

/// Reference solution by implicitly projected EDS with its own seed, refined
/// until consecutive iterates differ by at most 1e-14.
inline Vector refined_reference(LaplacianSystem& sys, std::span<const double> u0,
                                const FracExpParams& p, Index seed,
                                Ordering ordering = Ordering::rcm) {
  MethodConfig ref;
  ref.pole_kind = PoleKind::eds;
  ref.desing = Desing::implicit;
  ref.eds_seed = seed;
  ref.tol = kReferenceTolerance;
  ref.max_k = kReferenceMaxK;
  ref.ordering = ordering;
  DiffusionResult r = solve_fractional_diffusion(sys, u0, p, ref);
  if (!r.converged && !r.breakdown) {
    throw NumericalError("reference solution did not reach the 1e-14 consecutive "
                         "difference within " + std::to_string(kReferenceMaxK) +
                         " iterations");
  }
  return std::move(r.u);
}

inline StudyResult convergence_study(LaplacianSystem& sys, std::span<const double> u0,
                                     const FracExpParams& p,
                                     const std::vector<MethodConfig>& cfgs,
                                     ReferenceKind reference,
                                     Index dense_limit = kDefaultDenseLimit,
                                     bool emit_uncorrected = true) {
  StudyResult out;
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const Ordering ordering = cfgs.empty() ? Ordering::rcm : cfgs.front().ordering;
  ensure_null_vector(sys, ordering);
  const bool needs_extents =
      reference == ReferenceKind::eds_implicit_refined ||
      std::any_of(cfgs.begin(), cfgs.end(), [](const MethodConfig& c) {
        return c.pole_kind == PoleKind::si_geomean || c.pole_kind == PoleKind::eds;
      });
  if (needs_extents) estimate_extents(sys, 1e-10, 100000, ordering);
  out.setup_seconds = std::chrono::duration<double>(clock::now() - t0).count();

  std::vector<std::string> ref_warnings;
  const Vector u = detail::checked_initial_vector(u0, sys.n, ref_warnings);
  out.warnings = ref_warnings;
  if (reference == ReferenceKind::dense) {
    out.reference = dense_reference(sys, u, p, dense_limit);
  } else {
    Index seed = 0;
    for (const auto& c : cfgs) seed = std::max(seed, c.eds_seed);
    out.reference = refined_reference(sys, u, p, seed + 1, ordering);
  }
  const double ref_norm = norm2(out.reference);

  const auto record = [&](const std::string& label, const std::vector<Vector>& its,
                          const std::vector<double>& secs) {
    for (Index k = 0; k < its.size(); ++k) {
      ConvergenceRecord r;
      r.method = label;
      r.k = k + 1;
      r.rel_error = norm2(subtract(out.reference, its[k])) / ref_norm;
      r.sum_dev = std::abs(sum(its[k]) - 1.0);
      r.seconds = k < secs.size() ? secs[k] : 0.0;
      out.records.push_back(std::move(r));
    }
  };

  for (MethodConfig cfg : cfgs) {
    cfg.final_only = false;
    DiffusionResult r = solve_fractional_diffusion(sys, u, p, cfg);
    for (auto& w : r.warnings) out.warnings.push_back(cfg.label() + ": " + w);
    record(cfg.label(), r.iterates, r.seconds);
    if (emit_uncorrected && cfg.desing == Desing::none_with_correction) {
      record(std::string(to_string(cfg.pole_kind)) + "/uncorrected", r.raw_iterates,
             r.seconds);
    }
  }
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const ConvergenceRecord& a, const ConvergenceRecord& b) {
                     return a.method != b.method ? a.method < b.method : a.k < b.k;
                   });
  return out;
}

inline constexpr std::string_view kCsvHeader = "method,k,rel_error,sum_dev,seconds";

/// Writes the study CSV. With `timing` off the seconds column is 0 so the
/// file is reproducible byte for byte.
inline void write_csv(std::ostream& out, const std::vector<ConvergenceRecord>& records,
                      bool timing = true) {
  out << kCsvHeader << '\n';
  char buf[160];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%.10e,%.10e,%.6f", static_cast<std::size_t>(r.k),
                  r.rel_error, r.sum_dev, timing ? r.seconds : 0.0);
    out << r.method << ',' << buf << '\n';
  }
}

/// Iterations needed to reach rel_error <= threshold for `label`, or 0.
inline Index iterations_to(const std::vector<ConvergenceRecord>& records,
                           std::string_view label, double threshold) {
  for (const auto& r : records) {
    if (r.method == label && r.rel_error <= threshold) return r.k;
  }
  return 0;
}

}  // namespace fracdiff
