#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "fracdiff/error.hpp"
#include "fracdiff/matfun.hpp"
#include "fracdiff/sparse.hpp"

namespace fracdiff {

/// Magnitudes of the smallest nonzero and the largest Laplacian eigenvalue.
struct SpectralExtent {
  double lambda2_abs = 0.0;
  double lambdaN_abs = 0.0;
  Index iterations_used = 0;
  bool converged = false;
};

enum class PoleKind { polynomial, si_geomean, si_time, eds };

inline constexpr std::string_view to_string(PoleKind k) {
  switch (k) {
    case PoleKind::polynomial: return "poly";
    case PoleKind::si_geomean: return "si-geomean";
    case PoleKind::si_time: return "si-time";
    case PoleKind::eds: return "eds";
  }
  return "?";
}

inline PoleKind parse_pole_kind(std::string_view s) {
  if (s == "poly" || s == "polynomial") return PoleKind::polynomial;
  if (s == "si-geomean") return PoleKind::si_geomean;
  if (s == "si-time") return PoleKind::si_time;
  if (s == "eds") return PoleKind::eds;
  throw InvalidArgument("unknown pole kind '" + std::string(s) + "'");
}

inline constexpr double kInfinitePole = std::numeric_limits<double>::infinity();

/**
 * Pole sequence xi_1, xi_2, ... on the negative real axis (or at infinity).
 *
 * Constant sequences give shift-and-invert subspaces. The EDS kind maps the
 * Kronecker sequence s_j = frac((j + seed)(sqrt 2 - 1)) log-uniformly onto
 * [-1.01 lambda_n, -0.99 lambda_2]; different seeds give different sequences
 * with the same asymptotic distribution.
 */
class PoleSequence {
public:
  PoleSequence() = default;

  static PoleSequence constant(PoleKind kind, double pole) {
    PoleSequence s;
    s.kind_ = kind;
    s.constant_ = pole;
    return s;
  }

  static PoleSequence equidistributed(double a, double b, Index seed) {
    PoleSequence s;
    s.kind_ = PoleKind::eds;
    s.a_ = a;
    s.b_ = b;
    s.seed_ = seed;
    return s;
  }

  PoleKind kind() const noexcept { return kind_; }
  Index seed() const noexcept { return seed_; }
  double lower() const noexcept { return a_; }
  double upper() const noexcept { return b_; }

  /// Pole used to build basis vector j + 1 (j >= 1).
  double operator()(Index j) const {
    if (kind_ != PoleKind::eds) return constant_;
    static const double step = std::sqrt(2.0) - 1.0;
    const double x = static_cast<double>(j + seed_) * step;
    const double s = x - std::floor(x);
    return -std::exp(std::log(a_) + s * std::log(b_ / a_));
  }

private:
  PoleKind kind_ = PoleKind::polynomial;
  double constant_ = kInfinitePole;
  double a_ = 0.0;
  double b_ = 0.0;
  Index seed_ = 0;
};

inline PoleSequence pole_sequence(PoleKind kind,
                                  const std::optional<SpectralExtent>& extent,
                                  const FracExpParams& p, Index eds_seed = 0) {
  const auto need_extent = [&]() -> const SpectralExtent& {
    if (!extent) {
      throw InvalidArgument(std::string("pole kind '") +
                            std::string(to_string(kind)) +
                            "' needs lambda_2 and lambda_n estimates");
    }
    if (!(extent->lambda2_abs > 0.0) || !(extent->lambdaN_abs >= extent->lambda2_abs)) {
      throw InvalidArgument("invalid spectral extent");
    }
    return *extent;
  };
  switch (kind) {
    case PoleKind::polynomial:
      return PoleSequence::constant(kind, kInfinitePole);
    case PoleKind::si_geomean: {
      const auto& e = need_extent();
      return PoleSequence::constant(kind, -std::sqrt(e.lambda2_abs * e.lambdaN_abs));
    }
    case PoleKind::si_time:
      if (!(p.t > 0.0)) {
        throw InvalidArgument("si-time pole -t^(-2/alpha) is undefined for t = 0; "
                              "use another pole kind");
      }
      return PoleSequence::constant(kind, -std::pow(p.t, -2.0 / p.alpha));
    case PoleKind::eds: {
      const auto& e = need_extent();
      return PoleSequence::equidistributed(0.99 * e.lambda2_abs, 1.01 * e.lambdaN_abs,
                                           eds_seed);
    }
  }
  throw InvalidArgument("unknown pole kind");
}

/// Asymptotic convergence factor rho = exp(-pi^2 / log(4b/a)) for [a, b].
inline double eds_rate(double a, double b) {
  constexpr double pi = 3.14159265358979323846;
  return std::exp(-pi * pi / std::log(4.0 * b / a));
}

}  // namespace fracdiff
