#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support/graphs.hpp"

using namespace fracdiff;
namespace ft = fracdiff::testing;

namespace {

double gershgorin(const LaplacianSystem& sys) { return 2 * *std::max_element(sys.degrees.begin(), sys.degrees.end()); }

}  // namespace

TEST(LambdaMax, Examples) {
  const LaplacianSystem k2 = build_laplacian(ft::k2_adjacency());
  EXPECT_NEAR(estimate_lambda_max(k2, 1e-12).value, 2.0, 1e-6);
  const LaplacianSystem c3 = build_laplacian(ft::cycle_adjacency(3));
  EXPECT_NEAR(estimate_lambda_max(c3, 1e-12).value, std::sqrt(3.0), 1e-4);
}

TEST(LambdaTwo, Examples) {
  LaplacianSystem k2 = build_laplacian(ft::k2_adjacency());
  ensure_null_vector(k2);
  EXPECT_NEAR(estimate_lambda_2(k2, 2.0).value, 2.0, 1e-6);
  LaplacianSystem c3 = build_laplacian(ft::cycle_adjacency(3));
  ensure_null_vector(c3);
  EXPECT_NEAR(estimate_lambda_2(c3, std::sqrt(3.0)).value, std::sqrt(3.0), 1e-4);
  EXPECT_THROW(estimate_lambda_2(build_laplacian(ft::k2_adjacency()), 2.0), InvalidArgument);
}

TEST(Extents, MatchSymmetricEigensolver) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 15; ++trial) {
    // undirected: symmetrize a random strongly connected digraph
    const SparseMatrix d = ft::random_digraph(rng, 10, 200, 2.0);
    const SparseMatrix a = SparseMatrix::from_triplets(d.rows(), d.cols(), [&] {
      std::vector<Triplet> t;
      for (Index i = 0; i < d.rows(); ++i)
        for (Index j : d.row_cols(i)) {
          t.push_back({i, j, 0.5});
          t.push_back({j, i, 0.5});
        }
      return t;
    }());
    LaplacianSystem sys = build_laplacian(a);
    const SpectralExtent e = estimate_extents(sys);
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(to_dense(sys.L));
    const double l2 = es.eigenvalues()(1), ln = es.eigenvalues()(sys.n - 1);
    EXPECT_NEAR(e.lambda2_abs, l2, 0.01 * l2) << "n " << sys.n;
    EXPECT_NEAR(e.lambdaN_abs, ln, 0.01 * ln) << "n " << sys.n;
  }
}

TEST(Extents, BoundsOnDigraphs) {
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 30; ++trial) {
    LaplacianSystem sys = build_laplacian(ft::random_digraph(rng, 2, 100));
    const SpectralExtent e = estimate_extents(sys);
    EXPECT_GT(e.lambda2_abs, 0.0);
    EXPECT_LE(e.lambdaN_abs, gershgorin(sys) * (1 + 1e-12));
    EXPECT_LE(e.lambda2_abs, e.lambdaN_abs * (1 + 1e-10));
    // power iteration is only rough when several eigenvalues share a modulus
    const Eigen::VectorXcd ev = Eigen::EigenSolver<DenseMatrix>(to_dense(sys.L)).eigenvalues();
    double lo = 1e300, hi = 0;
    for (const auto& l : ev) {
      if (std::abs(l) > 1e-10) lo = std::min(lo, std::abs(l));
      hi = std::max(hi, std::abs(l));
    }
    EXPECT_NEAR(e.lambdaN_abs, hi, 0.25 * hi);
    EXPECT_NEAR(e.lambda2_abs, lo, 0.25 * lo);
  }
}

TEST(Extents, OverridesAreKept) {
  LaplacianSystem sys = build_laplacian(ft::cycle_adjacency(5));
  sys.lambda2 = 0.123;
  sys.lambdaN = 4.56;
  const SpectralExtent e = estimate_extents(sys);
  EXPECT_EQ(e.lambda2_abs, 0.123);
  EXPECT_EQ(e.lambdaN_abs, 4.56);
}
