#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support/graphs.hpp"

using namespace fracdiff;
namespace ft = fracdiff::testing;

namespace {

LinearOperator identity_operator(Index n) {
  LinearOperator op;
  op.dimension = n;
  op.apply = [](std::span<const double> v) { return Vector(v.begin(), v.end()); };
  op.shifted_solve = [](double xi, std::span<const double> w) {
    Vector x(w.begin(), w.end());
    for (double& v : x) v /= 1.0 - xi;
    return x;
  };
  return op;
}

double orthonormality_defect(const KrylovState& s) {
  double worst = 0.0;
  for (Index i = 0; i < s.k(); ++i)
    for (Index j = 0; j < s.k(); ++j)
      worst = std::max(worst, std::abs(dot(s.V[i], s.V[j]) - (i == j ? 1.0 : 0.0)));
  return worst;
}

/// w with 1^T w = 0 (the implicit-projection starting vector).
Vector zero_sum_vector(std::mt19937_64& rng, Index n) {
  Vector w = ft::random_vector(rng, n);
  const double m = sum(w) / static_cast<double>(n);
  for (double& v : w) v -= m;
  return w;
}

PoleSequence poles_for(PoleKind kind, LaplacianSystem& sys, const FracExpParams& p) {
  if (kind == PoleKind::eds || kind == PoleKind::si_geomean) estimate_extents(sys);
  return pole_sequence(kind, cached_extents(sys), p, 0);
}

}  // namespace

TEST(RationalArnoldi, IdentityBreaksDownImmediately) {
  const LinearOperator op = identity_operator(4);
  KrylovState s = start_krylov(op, Vector{1, 2, 3, 4});
  rational_arnoldi_step(s, op, kInfinitePole);
  EXPECT_TRUE(s.breakdown);
  EXPECT_EQ(s.k(), 1u);
  EXPECT_THROW(rational_arnoldi_step(s, op, kInfinitePole), InvalidArgument);
}

TEST(RationalArnoldi, EigenvectorStartBreaksDown) {
  const LaplacianSystem sys = build_laplacian(ft::k2_adjacency());
  const LinearOperator op = laplacian_operator(sys);
  for (double pole : {kInfinitePole, -1.0, -0.3}) {
    KrylovState s = start_krylov(op, Vector{0.5, -0.5});
    rational_arnoldi_step(s, op, pole);
    EXPECT_TRUE(s.breakdown);
    EXPECT_EQ(s.k(), 1u);
  }
  const KrylovResult r = krylov_fAb(op, Vector{0.5, -0.5}, {1, 0.5},
                                    PoleSequence::constant(PoleKind::si_time, -1.0), {});
  EXPECT_TRUE(r.breakdown);
  EXPECT_EQ(r.k, 1u);
  EXPECT_NEAR(r.y[0], 0.121558, 5e-7);
  EXPECT_NEAR(r.y[1], -0.121558, 5e-7);
  EXPECT_NEAR(r.y[0], 0.5 * std::exp(-std::sqrt(2.0)), 1e-15);
}

TEST(RationalArnoldi, K2PolynomialSpansTheSpace) {
  const LaplacianSystem sys = build_laplacian(ft::k2_adjacency());
  const LinearOperator op = laplacian_operator(sys);
  KrylovState s = start_krylov(op, Vector{1, 0});
  rational_arnoldi_step(s, op, kInfinitePole);
  ASSERT_FALSE(s.breakdown);
  EXPECT_EQ(s.k(), 2u);
  EXPECT_LE(orthonormality_defect(s), 1e-14);
  rational_arnoldi_step(s, op, kInfinitePole);
  EXPECT_TRUE(s.breakdown);
}

TEST(RationalArnoldi, ProjectedMatrixMatchesDefinition) {
  std::mt19937_64 rng(41);
  LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 20, 30));
  const LinearOperator op = laplacian_operator(sys);
  KrylovState s = start_krylov(op, ft::random_vector(rng, sys.n));
  for (int j = 0; j < 8; ++j) rational_arnoldi_step(s, op, -0.5 - j);
  const DenseMatrix a = to_dense(sys.Lt);
  DenseMatrix v(sys.n, s.k());
  for (Index j = 0; j < s.k(); ++j) v.col(j) = ft::to_eigen(s.V[j]);
  EXPECT_LE((v.transpose() * a * v - s.B).norm(), 1e-13 * s.B.norm());
}

TEST(RationalArnoldi, OrthonormalForAllPoleKinds) {
  std::mt19937_64 rng(42);
  const FracExpParams p{1, 0.5};
  for (int trial = 0; trial < 10; ++trial) {
    LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 30, 80));
    const LinearOperator op = laplacian_operator(sys);
    for (PoleKind kind : kAllPoleKinds) {
      const PoleSequence poles = poles_for(kind, sys, p);
      KrylovState s = start_krylov(op, zero_sum_vector(rng, sys.n));
      for (Index j = 1; j <= 25 && !s.breakdown; ++j) {
        rational_arnoldi_step(s, op, poles(j));
        EXPECT_LE(orthonormality_defect(s), 1e-10);
      }
    }
  }
}

TEST(KrylovFAb, TimeZeroReturnsTheStartVector) {
  std::mt19937_64 rng(43);
  const LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 10, 20));
  const Vector b = zero_sum_vector(rng, sys.n);
  const KrylovResult r = krylov_fAb(laplacian_operator(sys), b, {0, 0.5},
                                    PoleSequence::constant(PoleKind::polynomial, kInfinitePole),
                                    {});
  ASSERT_FALSE(r.iterates.empty());
  for (Index i = 0; i < sys.n; ++i) EXPECT_NEAR(r.iterates[0][i], b[i], 1e-15);
}

TEST(KrylovFAb, ExactAtInvarianceAndAtFullDimension) {
  std::mt19937_64 rng(44);
  const FracExpParams params[] = {{1, 0.5}, {0.5, 0.25}, {10, 1}};
  for (int trial = 0; trial < 15; ++trial) {
    LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 3, 30));
    const Vector w = ft::random_vector(rng, sys.n, 0.0, 1.0);
    for (const auto& p : params) {
      const Vector ref = dense_reference(sys, w, p);
      for (PoleKind kind : kAllPoleKinds) {
        StoppingRule stop;
        stop.max_k = sys.n;
        const KrylovResult r =
            krylov_fAb(laplacian_operator(sys), w, p, poles_for(kind, sys, p), stop);
        EXPECT_TRUE(r.breakdown || r.k == sys.n);
        EXPECT_LE(ft::rel_diff(r.y, ref), 1e-9)
            << "n " << sys.n << " kind " << to_string(kind) << " k " << r.k;
      }
    }
  }
}

TEST(KrylovFAb, IteratesLieInTheBasisSpan) {
  std::mt19937_64 rng(45);
  LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 40, 60));
  const LinearOperator op = laplacian_operator(sys);
  const FracExpParams p{1, 0.5};
  const PoleSequence poles = poles_for(PoleKind::eds, sys, p);
  KrylovState s = start_krylov(op, zero_sum_vector(rng, sys.n));
  for (Index j = 1; j <= 12; ++j) {
    rational_arnoldi_step(s, op, poles(j));
    const Vector y = krylov_iterate(s, p);
    Vector r = y;
    for (const auto& v : s.V) axpy(-dot(v, y), v, r);
    EXPECT_LE(norm2(r), 1e-12 * norm2(y));
  }
}

TEST(KrylovFAb, ConsecutiveDifferenceStop) {
  std::mt19937_64 rng(46);
  LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 60, 80));
  const FracExpParams p{1, 0.5};
  StoppingRule stop;
  stop.max_k = 200;
  stop.tol = 1e-10;
  const KrylovResult r = krylov_fAb(laplacian_operator(sys), zero_sum_vector(rng, sys.n), p,
                                    poles_for(PoleKind::eds, sys, p), stop);
  ASSERT_TRUE(r.converged || r.breakdown);
  if (r.converged) {
    const auto& its = r.iterates;
    EXPECT_LE(norm2(subtract(its[its.size() - 1], its[its.size() - 2])), 1e-10);
  }
  EXPECT_EQ(r.iterates.size(), r.k);
}

TEST(KrylovFAb, FinalOnlyMatchesFullHistory) {
  std::mt19937_64 rng(47);
  LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 30, 40));
  const FracExpParams p{1, 0.75};
  const Vector w = zero_sum_vector(rng, sys.n);
  const PoleSequence poles = poles_for(PoleKind::si_geomean, sys, p);
  StoppingRule full;
  full.max_k = 12;
  StoppingRule last = full;
  last.final_only = true;
  const KrylovResult a = krylov_fAb(laplacian_operator(sys), w, p, poles, full);
  const KrylovResult b = krylov_fAb(laplacian_operator(sys), w, p, poles, last);
  EXPECT_EQ(a.k, b.k);
  EXPECT_EQ(a.y, b.y);
}

TEST(KrylovFAb, RejectsZeroStart) {
  const LaplacianSystem sys = build_laplacian(ft::k2_adjacency());
  EXPECT_THROW(krylov_fAb(laplacian_operator(sys), Vector{0, 0}, {1, 0.5}, PoleSequence{}, {}),
               InvalidArgument);
}
