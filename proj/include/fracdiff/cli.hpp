#pragma once

// Command dispatch behind the `fracdiff` executable. Flag parsing lives in the
// tool itself; everything here works on an already parsed CliConfig so it can
// be driven from tests.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fracdiff/direct_solver.hpp"
#include "fracdiff/error.hpp"
#include "fracdiff/harness.hpp"
#include "fracdiff/laplacian.hpp"
#include "fracdiff/matrix_market.hpp"
#include "fracdiff/spectral.hpp"

namespace fracdiff {

enum class Command { solve, study, spectrum, nullvec, scc };

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitNumerical = 3, kExitIo = 4 };

struct CliConfig {
  Command command = Command::solve;
  std::filesystem::path graph_path;
  double t = 1.0;
  double alpha = 0.5;
  /// Empty means "all" for study and eds / implicit for solve.
  std::vector<PoleKind> poles;
  std::vector<Desing> desings;
  double theta = 1.0;
  double tol = 0.0;
  Index max_k = 50;
  std::optional<double> lambda2;
  std::optional<double> lambdaN;
  Ordering ordering = Ordering::rcm;
  std::optional<std::filesystem::path> out;
  Index eds_seed = 0;
  Index dense_limit = kDefaultDenseLimit;
  /// 1-based node id of the original graph; default is the first LCC node.
  std::optional<Index> source;
  std::optional<ReferenceKind> reference;
  bool timing = true;
};

namespace detail {

struct LoadedGraph {
  Component lcc;
  Index original_n = 0;
  Index original_nnz = 0;
};

inline LoadedGraph load_lcc(const CliConfig& cfg) {
  LoadedGraph g;
  const SparseMatrix adj = load_matrix_market(cfg.graph_path);
  if (!adj.is_square()) throw InvalidArgument("adjacency matrix must be square");
  g.original_n = adj.rows();
  g.original_nnz = adj.nnz();
  g.lcc = largest_scc(adj);
  return g;
}

inline LaplacianSystem prepare_system(const CliConfig& cfg, const LoadedGraph& g,
                                      std::ostream& err) {
  if (g.lcc.nodes.size() < 2) {
    throw InvalidArgument("largest strongly connected component has fewer than 2 nodes");
  }
  if (g.lcc.nodes.size() != g.original_n) {
    err << "note: using the largest strongly connected component (" << g.lcc.nodes.size()
        << " of " << g.original_n << " nodes)\n";
  }
  LaplacianSystem sys = build_laplacian(g.lcc.adjacency);
  if (cfg.lambda2) sys.lambda2 = *cfg.lambda2;
  if (cfg.lambdaN) sys.lambdaN = *cfg.lambdaN;
  return sys;
}

/// e_s on the LCC, s the requested source or the first LCC node.
inline Vector initial_vector(const CliConfig& cfg, const LoadedGraph& g) {
  Vector u0(g.lcc.nodes.size(), 0.0);
  Index local = 0;
  if (cfg.source) {
    if (*cfg.source == 0 || *cfg.source > g.original_n) {
      throw InvalidArgument("source node out of range");
    }
    const Index orig = *cfg.source - 1;
    const auto it = std::lower_bound(g.lcc.nodes.begin(), g.lcc.nodes.end(), orig);
    if (it == g.lcc.nodes.end() || *it != orig) {
      throw InvalidArgument("source node " + std::to_string(*cfg.source) +
                            " is outside the largest strongly connected component");
    }
    local = static_cast<Index>(it - g.lcc.nodes.begin());
  }
  u0[local] = 1.0;
  return u0;
}

inline bool needs_extents(PoleKind k) {
  return k == PoleKind::si_geomean || k == PoleKind::eds;
}

inline void write_vector(const std::filesystem::path& path, const Vector& v) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  char buf[40];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, "%.17g\n", x);
    f << buf;
  }
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

inline std::string fmt(const char* format, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, x);
  return buf;
}

inline int run_solve(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const LoadedGraph g = load_lcc(cfg);
  LaplacianSystem sys = prepare_system(cfg, g, err);
  const Vector u0 = initial_vector(cfg, g);

  MethodConfig m;
  m.pole_kind = cfg.poles.empty() ? PoleKind::eds : cfg.poles.front();
  m.desing = cfg.desings.empty() ? Desing::implicit : cfg.desings.front();
  m.theta = cfg.theta;
  m.tol = cfg.tol;
  m.max_k = cfg.max_k;
  m.eds_seed = cfg.eds_seed;
  m.ordering = cfg.ordering;
  m.final_only = cfg.tol <= 0.0;
  const FracExpParams p{cfg.t, cfg.alpha};
  if (needs_extents(m.pole_kind)) estimate_extents(sys, 1e-10, 100000, cfg.ordering);

  const DiffusionResult r = solve_fractional_diffusion(sys, u0, p, m);
  for (const auto& w : r.warnings) err << "warning: " << w << '\n';

  const Vector& u = r.u;
  out << "method " << m.label() << '\n';
  out << "n " << u.size() << '\n';
  out << "k " << r.k << (r.breakdown ? " (invariant subspace)" : "") << '\n';
  out << "sum " << fmt("%.15g", sum(u)) << '\n';
  out << "min " << fmt("%.15g", *std::min_element(u.begin(), u.end())) << '\n';
  out << "max " << fmt("%.15g", *std::max_element(u.begin(), u.end())) << '\n';

  std::vector<Index> order(u.size());
  std::iota(order.begin(), order.end(), Index{0});
  const Index top = std::min<Index>(5, u.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top),
                    order.end(), [&](Index a, Index b) {
                      return u[a] != u[b] ? u[a] > u[b] : a < b;
                    });
  out << "top";
  for (Index i = 0; i < top; ++i) {
    out << ' ' << g.lcc.nodes[order[i]] + 1 << ':' << fmt("%.10g", u[order[i]]);
  }
  out << '\n';
  if (cfg.out) write_vector(*cfg.out, u);
  return kExitOk;
}

inline int run_study(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const LoadedGraph g = load_lcc(cfg);
  LaplacianSystem sys = prepare_system(cfg, g, err);
  const Vector u0 = initial_vector(cfg, g);
  const FracExpParams p{cfg.t, cfg.alpha};

  std::vector<PoleKind> poles = cfg.poles;
  if (poles.empty()) poles.assign(std::begin(kAllPoleKinds), std::end(kAllPoleKinds));
  std::vector<Desing> desings = cfg.desings;
  if (desings.empty()) desings.assign(std::begin(kAllDesings), std::end(kAllDesings));

  std::vector<MethodConfig> cfgs;
  for (PoleKind pk : poles) {
    if (pk == PoleKind::si_time && !(p.t > 0.0)) {
      err << "warning: skipping si-time poles, undefined for t = 0\n";
      continue;
    }
    for (Desing d : desings) {
      MethodConfig m;
      m.pole_kind = pk;
      m.desing = d;
      m.theta = cfg.theta;
      m.tol = cfg.tol;
      m.max_k = cfg.max_k;
      m.eds_seed = cfg.eds_seed;
      m.ordering = cfg.ordering;
      cfgs.push_back(m);
    }
  }
  const ReferenceKind ref = cfg.reference.value_or(
      sys.n <= cfg.dense_limit ? ReferenceKind::dense : ReferenceKind::eds_implicit_refined);

  const StudyResult s = convergence_study(sys, u0, p, cfgs, ref, cfg.dense_limit);
  for (const auto& w : s.warnings) err << "warning: " << w << '\n';
  if (cfg.out) {
    std::ofstream f(*cfg.out);
    if (!f) throw IoError("cannot open '" + cfg.out->string() + "' for writing");
    write_csv(f, s.records, cfg.timing);
    if (!f) throw IoError("write to '" + cfg.out->string() + "' failed");
  } else {
    write_csv(out, s.records, cfg.timing);
  }
  return kExitOk;
}

inline int run_spectrum(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const LoadedGraph g = load_lcc(cfg);
  LaplacianSystem sys = prepare_system(cfg, g, err);
  const SpectralExtent e = estimate_extents(sys, 1e-10, 100000, cfg.ordering);
  if (!e.converged) err << "warning: eigenvalue iteration hit its cap\n";
  out << "lambda2 " << fmt("%.10e", e.lambda2_abs) << '\n';
  out << "lambdaN " << fmt("%.10e", e.lambdaN_abs) << '\n';
  return kExitOk;
}

inline int run_nullvec(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const LoadedGraph g = load_lcc(cfg);
  LaplacianSystem sys = prepare_system(cfg, g, err);
  const Vector& z = ensure_null_vector(sys, cfg.ordering);
  if (cfg.out) {
    write_vector(*cfg.out, z);
  } else {
    for (double x : z) out << fmt("%.17g", x) << '\n';
  }
  return kExitOk;
}

inline int run_scc(const CliConfig& cfg, std::ostream& out) {
  const LoadedGraph g = load_lcc(cfg);
  out << "n=" << g.lcc.nodes.size() << " nnz=" << g.lcc.adjacency.nnz() << '\n';
  return kExitOk;
}

}  // namespace detail

/// Runs one command; domain errors become a message on `err` and a nonzero
/// exit status (2 usage, 3 numerical, 4 I/O or parse).
inline int run_command(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.graph_path.empty()) throw InvalidArgument("--graph is required");
    FracExpParams{cfg.t, cfg.alpha}.validate();
    if (!(cfg.theta > 0.0)) throw InvalidArgument("--theta must be positive");
    if (!(cfg.tol >= 0.0)) throw InvalidArgument("--tol must be nonnegative");
    if (cfg.max_k == 0) throw InvalidArgument("--max-k must be positive");
    if (cfg.lambda2 && !(*cfg.lambda2 > 0.0)) throw InvalidArgument("--lambda2 must be positive");
    if (cfg.lambdaN && !(*cfg.lambdaN > 0.0)) throw InvalidArgument("--lambdan must be positive");
    switch (cfg.command) {
      case Command::solve: return detail::run_solve(cfg, out, err);
      case Command::study: return detail::run_study(cfg, out, err);
      case Command::spectrum: return detail::run_spectrum(cfg, out, err);
      case Command::nullvec: return detail::run_nullvec(cfg, out, err);
      case Command::scc: return detail::run_scc(cfg, out);
    }
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace fracdiff
