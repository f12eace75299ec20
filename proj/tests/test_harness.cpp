#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "support/graphs.hpp"

using namespace fracdiff;
namespace ft = fracdiff::testing;

namespace {

MethodConfig method(PoleKind kind, Desing d, Index max_k = 50) {
  MethodConfig m;
  m.pole_kind = kind;
  m.desing = d;
  m.max_k = max_k;
  return m;
}

std::vector<MethodConfig> all_methods(Index max_k) {
  std::vector<MethodConfig> out;
  for (PoleKind k : kAllPoleKinds) {
    for (Desing d : kAllDesings) out.push_back(method(k, d, max_k));
  }
  return out;
}

bool desingularized(Desing d) { return d != Desing::none_with_correction; }

}  // namespace

TEST(SolveDiffusion, K2ClosedFormForEveryPoleKind) {
  LaplacianSystem sys = build_laplacian(ft::k2_adjacency());
  estimate_extents(sys);
  const Vector u0{1.0, 0.0};
  for (PoleKind kind : kAllPoleKinds) {
    const DiffusionResult r =
        solve_fractional_diffusion(sys, u0, {1, 0.5}, method(kind, Desing::implicit, 2));
    EXPECT_LE(r.k, 2u);
    EXPECT_NEAR(r.u[0], 0.6215584, 1e-7) << to_string(kind);
    EXPECT_NEAR(r.u[1], 0.3784416, 1e-7) << to_string(kind);
  }
}

TEST(SolveDiffusion, TimeZeroReturnsInitialVectorAtFirstIterate) {
  std::mt19937_64 rng(51);
  LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 10, 30));
  estimate_extents(sys);
  Vector u0 = ft::random_vector(rng, sys.n, 0.0, 1.0);
  const double s = sum(u0);
  for (double& v : u0) v /= s;
  for (PoleKind kind : {PoleKind::polynomial, PoleKind::si_geomean, PoleKind::eds}) {
    for (Desing d : kAllDesings) {
      const DiffusionResult r = solve_fractional_diffusion(sys, u0, {0, 0.5}, method(kind, d));
      ASSERT_FALSE(r.iterates.empty());
      EXPECT_LE(ft::rel_diff(r.iterates[0], u0), 1e-13) << method(kind, d).label();
    }
  }
}

TEST(SolveDiffusion, AlphaOneOnThreeCycleIsTheMatrixExponential) {
  LaplacianSystem sys = build_laplacian(ft::cycle_adjacency(3));
  estimate_extents(sys);
  const Vector u0{1.0, 0.0, 0.0};
  const DenseMatrix e = DenseMatrix(-to_dense(sys.Lt)).exp();
  const Vector expected = ft::from_eigen(e * ft::to_eigen(u0));
  for (const MethodConfig& m : all_methods(3)) {
    const DiffusionResult r = solve_fractional_diffusion(sys, u0, {1, 1}, m);
    EXPECT_LE(ft::rel_diff(r.u, expected), 1e-10) << m.label();
  }
}

TEST(SolveDiffusion, RankOneShiftMatchesDenseAtInvarianceForBothThetas) {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 10; ++trial) {
    LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 5, 30));
    estimate_extents(sys);
    const Vector u0 = unit_vector(sys.n, ft::uniform_index(rng, sys.n));
    const FracExpParams p{1, 0.5};
    const Vector ref = dense_reference(sys, u0, p);
    for (double theta : {1.0, *sys.lambdaN}) {
      MethodConfig m = method(PoleKind::eds, Desing::rank_one, sys.n);
      m.theta = theta;
      const DiffusionResult r = solve_fractional_diffusion(sys, u0, p, m);
      EXPECT_LE(ft::rel_diff(r.u, ref), 1e-9) << "n " << sys.n << " theta " << theta;
    }
  }
}

TEST(SolveDiffusion, StationaryStartIsReturnedUnchanged) {
  std::mt19937_64 rng(53);
  LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 10, 20));
  const Vector z = ensure_null_vector(sys);
  for (Desing d : {Desing::projected, Desing::implicit}) {
    const DiffusionResult r = solve_fractional_diffusion(sys, z, {1, 0.5},
                                                         method(PoleKind::polynomial, d));
    EXPECT_LE(ft::rel_diff(r.u, z), 1e-14);
  }
}

TEST(SolveDiffusion, InitialVectorChecks) {
  LaplacianSystem sys = build_laplacian(ft::cycle_adjacency(4));
  const MethodConfig m = method(PoleKind::polynomial, Desing::implicit);
  EXPECT_THROW(solve_fractional_diffusion(sys, Vector(4, 0.0), {1, 0.5}, m), InvalidArgument);
  EXPECT_THROW(solve_fractional_diffusion(sys, Vector{1, -1, 1, 0}, {1, 0.5}, m),
               InvalidArgument);
  EXPECT_THROW(solve_fractional_diffusion(sys, Vector(3, 0.25), {1, 0.5}, m), DimensionMismatch);

  const DiffusionResult r = solve_fractional_diffusion(sys, Vector{2, 0, 0, 0}, {1, 0.5}, m);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NEAR(sum(r.u), 1.0, 1e-12);
}

TEST(SolveDiffusion, MissingExtentsAreReported) {
  LaplacianSystem sys = build_laplacian(ft::cycle_adjacency(4));
  EXPECT_THROW(solve_fractional_diffusion(sys, unit_vector(4, 0), {1, 0.5},
                                          method(PoleKind::eds, Desing::implicit)),
               InvalidArgument);
}

TEST(SolveDiffusion, ProjectedIteratesConserveProbabilityAtEveryStep) {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 8; ++trial) {
    LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 20, 60));
    estimate_extents(sys);
    const Vector u0 = unit_vector(sys.n, 0);
    for (const MethodConfig& m : all_methods(20)) {
      if (m.desing == Desing::rank_one) continue;
      const DiffusionResult r = solve_fractional_diffusion(sys, u0, {1, 0.5}, m);
      for (const Vector& y : r.iterates) {
        EXPECT_LE(std::abs(sum(y) - 1.0), m.desing == Desing::none_with_correction ? 1e-13 : 1e-10)
            << m.label();
      }
    }
  }
}

// 1 is a left eigenvector of L^T + theta z 1^T, so the sum of a shifted
// iterate is the Krylov interpolant at theta; unit sum holds once converged.
TEST(SolveDiffusion, RankOneFinalIteratesConserveProbability) {
  std::mt19937_64 rng(58);
  for (int trial = 0; trial < 8; ++trial) {
    LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 20, 60));
    estimate_extents(sys);
    const Vector u0 = unit_vector(sys.n, 0);
    for (PoleKind kind : kAllPoleKinds) {
      MethodConfig m = method(kind, Desing::rank_one, sys.n);
      m.tol = 1e-13;
      const DiffusionResult r = solve_fractional_diffusion(sys, u0, {1, 0.5}, m);
      ASSERT_TRUE(r.converged || r.breakdown || r.k == sys.n) << m.label();
      EXPECT_LE(std::abs(sum(r.u) - 1.0), 1e-10) << m.label() << " k " << r.k;
      EXPECT_GE(*std::min_element(r.u.begin(), r.u.end()), -1e-8) << m.label();
      // The early deviation is real, not rounding.
      EXPECT_GT(std::abs(sum(r.iterates.front()) - 1.0), 1e-6) << m.label();
    }
  }
}

TEST(SolveDiffusion, DesingularizedFinalIteratesAreNonnegative) {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 8; ++trial) {
    LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 10, 40));
    estimate_extents(sys);
    const Vector u0 = unit_vector(sys.n, 0);
    for (const MethodConfig& m : all_methods(sys.n)) {
      if (!desingularized(m.desing)) continue;
      const DiffusionResult r = solve_fractional_diffusion(sys, u0, {1, 0.5}, m);
      EXPECT_GE(*std::min_element(r.u.begin(), r.u.end()), -1e-8) << m.label();
      EXPECT_LE(std::abs(sum(r.u) - 1.0), 1e-10) << m.label();
    }
  }
}

TEST(ConvergenceStudy, K2AllMethodsExactByStepTwo) {
  LaplacianSystem sys = build_laplacian(ft::k2_adjacency());
  const StudyResult s =
      convergence_study(sys, Vector{1, 0}, {1, 0.5}, all_methods(4), ReferenceKind::dense);
  for (const MethodConfig& m : all_methods(4)) {
    const Index k = iterations_to(s.records, m.label(), 1e-12);
    EXPECT_GE(k, 1u) << m.label();
    EXPECT_LE(k, 2u) << m.label();
  }
}

TEST(ConvergenceStudy, CsvHeaderAndRowShape) {
  LaplacianSystem sys = build_laplacian(ft::k2_adjacency());
  const StudyResult s = convergence_study(sys, Vector{1, 0}, {1, 0.5},
                                          {method(PoleKind::polynomial, Desing::none_with_correction)},
                                          ReferenceKind::dense);
  std::ostringstream os;
  write_csv(os, s.records, false);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "method,k,rel_error,sum_dev,seconds");
  Index rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4) << line;
    EXPECT_TRUE(line.rfind("poly/none,", 0) == 0 || line.rfind("poly/uncorrected,", 0) == 0)
        << line;
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "0.000000");
  }
  EXPECT_EQ(rows, s.records.size());
}

TEST(ConvergenceStudy, RecordsAreOrderedByLabelThenK) {
  std::mt19937_64 rng(55);
  LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 15, 25));
  const StudyResult s =
      convergence_study(sys, unit_vector(sys.n, 0), {1, 0.5}, all_methods(10), ReferenceKind::dense);
  for (std::size_t i = 1; i < s.records.size(); ++i) {
    const auto& a = s.records[i - 1];
    const auto& b = s.records[i];
    EXPECT_TRUE(a.method < b.method || (a.method == b.method && a.k + 1 == b.k));
    EXPECT_GE(b.rel_error, 0.0);
  }
}

// y - (1^T y - 1) z is an oblique projection of the error with norm
// sqrt(n) ||z||, so a single step may get slightly worse; the gap in favour
// of the corrected iterates shows up in the early, large errors.
TEST(ConvergenceStudy, CorrectionGap) {
  std::mt19937_64 rng(56);
  for (int trial = 0; trial < 5; ++trial) {
    LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 20, 50));
    std::vector<MethodConfig> cfgs;
    for (PoleKind k : kAllPoleKinds) cfgs.push_back(method(k, Desing::none_with_correction, 25));
    const StudyResult s =
        convergence_study(sys, unit_vector(sys.n, 0), {1, 0.5}, cfgs, ReferenceKind::dense);
    const double bound = norm2(*sys.z) * std::sqrt(static_cast<double>(sys.n));
    for (PoleKind k : kAllPoleKinds) {
      const std::string corrected = std::string(to_string(k)) + "/none";
      const std::string raw = std::string(to_string(k)) + "/uncorrected";
      std::map<Index, double> pre;
      for (const auto& r : s.records) {
        if (r.method == raw) pre[r.k] = r.rel_error;
      }
      Index helped = 0, steps = 0;
      for (const auto& r : s.records) {
        if (r.method != corrected) continue;
        ASSERT_TRUE(pre.count(r.k));
        ++steps;
        if (r.rel_error <= pre[r.k]) ++helped;
        EXPECT_LE(r.rel_error, bound * pre[r.k] + 1e-13) << corrected << " k " << r.k;
        if (r.k == 1) EXPECT_LT(r.rel_error, pre[r.k]) << corrected;
      }
      EXPECT_GE(2 * helped, steps) << corrected;
    }
  }
}

TEST(ConvergenceStudy, MonotoneTailOnSymmetricGraphs) {
  const FracExpParams p{1, 0.5};
  for (Index n : {50u, 100u}) {
    LaplacianSystem sys = build_laplacian(ft::path_adjacency(n));
    const std::vector<MethodConfig> cfgs{method(PoleKind::eds, Desing::implicit, 60),
                                         method(PoleKind::si_geomean, Desing::implicit, 60)};
    const StudyResult s = convergence_study(sys, unit_vector(n, 0), p, cfgs, ReferenceKind::dense);
    for (const MethodConfig& m : cfgs) {
      std::vector<double> e;
      for (const auto& r : s.records) {
        if (r.method == m.label()) e.push_back(r.rel_error);
      }
      for (std::size_t k = 0; k + 5 < e.size() && e[k] > 1e-12; ++k) {
        EXPECT_LE(e[k + 5], e[k]) << m.label() << " n " << n << " k " << k + 1;
      }
    }
  }
}

TEST(ConvergenceStudy, PathGraphMethodOrdering) {
  LaplacianSystem sys = build_laplacian(ft::path_adjacency(100));
  const std::vector<MethodConfig> cfgs{method(PoleKind::eds, Desing::implicit, 100),
                                       method(PoleKind::si_geomean, Desing::implicit, 100),
                                       method(PoleKind::polynomial, Desing::implicit, 100)};
  const StudyResult s =
      convergence_study(sys, unit_vector(100, 0), {1, 0.5}, cfgs, ReferenceKind::dense);
  const Index eds = iterations_to(s.records, "eds/implicit", 1e-8);
  const Index si = iterations_to(s.records, "si-geomean/implicit", 1e-8);
  const Index poly = iterations_to(s.records, "poly/implicit", 1e-8);
  ASSERT_GT(eds, 0u);
  ASSERT_GT(si, 0u);
  ASSERT_GT(poly, 0u);
  EXPECT_LE(eds, si);
  EXPECT_LE(si, poly);
}

TEST(ConvergenceStudy, RefinedReferenceAgreesWithDense) {
  std::mt19937_64 rng(57);
  LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 60, 80));
  estimate_extents(sys);
  const Vector u0 = unit_vector(sys.n, 0);
  const FracExpParams p{1, 0.5};
  const Vector refined = refined_reference(sys, u0, p, 7);
  EXPECT_LE(ft::rel_diff(refined, dense_reference(sys, u0, p)), 1e-11);
}

TEST(ConvergenceStudy, RefinedReferenceUsesAnUnusedSeed) {
  LaplacianSystem sys = build_laplacian(ft::path_adjacency(30));
  MethodConfig m = method(PoleKind::eds, Desing::implicit, 40);
  m.eds_seed = 3;
  const StudyResult dense =
      convergence_study(sys, unit_vector(30, 0), {1, 0.5}, {m}, ReferenceKind::dense);
  const StudyResult refined = convergence_study(sys, unit_vector(30, 0), {1, 0.5}, {m},
                                                ReferenceKind::eds_implicit_refined);
  EXPECT_LE(ft::rel_diff(refined.reference, dense.reference), 1e-12);
  // Same seed would make the last studied iterate identical to the reference.
  EXPECT_GT(refined.records.back().rel_error, 0.0);
}

TEST(ConvergenceStudy, IterationsToReportsZeroWhenNeverReached) {
  std::vector<ConvergenceRecord> recs{{"a", 1, 1e-3, 0, 0}, {"a", 2, 1e-9, 0, 0},
                                      {"b", 1, 1e-2, 0, 0}};
  EXPECT_EQ(iterations_to(recs, "a", 1e-8), 2u);
  EXPECT_EQ(iterations_to(recs, "b", 1e-8), 0u);
  EXPECT_EQ(iterations_to(recs, "c", 1.0), 0u);
}
