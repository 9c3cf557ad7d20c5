#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hgmd/error.hpp"
#include "hgmd/tensor.hpp"
#include "test_util.hpp"

namespace hgmd {
namespace {

DenseMatrix naive_product(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

void expect_near(const DenseMatrix& a, const DenseMatrix& b, double tol) {
  ASSERT_TRUE(a.same_shape(b));
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a.values()[k], b.values()[k], tol);
}

TEST(Products, AgreeWithNaiveLoops) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 7, k = 1 + rng() % 7, m = 1 + rng() % 7;
    DenseMatrix a = test::random_matrix(n, k, rng);
    a(0, 0) = 0.0;  // exercise the zero skip
    const DenseMatrix b = test::random_matrix(k, m, rng);
    expect_near(matmul(a, b), naive_product(a, b), 1e-12);
    expect_near(matmul_tn(transpose(a), b), naive_product(a, b), 1e-12);
    expect_near(matmul_nt(a, transpose(b)), naive_product(a, b), 1e-12);
  }
}

TEST(Products, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), Error);
}

TEST(Spmm, MatchesDenseProduct) {
  std::mt19937_64 rng(2);
  const Graph g = test::five_node_graph();
  const NormalizedAdjacency adj = normalize_adjacency(g);
  DenseMatrix dense(5, 5);
  for (NodeId i = 0; i < 5; ++i) {
    for (std::size_t k = adj.offsets[i]; k < adj.offsets[i + 1]; ++k) dense(i, adj.cols[k]) = adj.weights[k];
  }
  const DenseMatrix x = test::random_matrix(5, 4, rng);
  expect_near(spmm(adj, x), naive_product(dense, x), 1e-12);
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<double> z{std::normal_distribution<>(0, 5)(rng), std::normal_distribution<>(0, 5)(rng),
                                std::normal_distribution<>(0, 5)(rng)};
    const double tau = 0.5 + (rng() % 8) * 0.5;
    const auto p = softmax_temp(z, tau);
    double s = 0.0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    std::vector<double> shifted = z;
    for (double& v : shifted) v += 123.0;
    const auto q = softmax_temp(shifted, tau);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(p[k], q[k], 1e-12);
  }
}

TEST(Softmax, StableForHugeLogits) {
  const std::vector<double> z{1e6, 0.0, -1e6};
  const auto p = softmax_temp(z, 1.0);
  EXPECT_EQ(p[0], 1.0);
  std::vector<double> logp(3);
  log_softmax_temp(z, 1.0, logp);
  EXPECT_EQ(logp[0], 0.0);
  EXPECT_TRUE(std::isfinite(logp[2]));
}

TEST(Softmax, TemperatureFlattens) {
  const std::vector<double> z{2.0, 0.0};
  EXPECT_GT(softmax_temp(z, 1.0)[0], softmax_temp(z, 4.0)[0]);
}

TEST(KlDivergence, MatchesReference) {
  const std::vector<double> p{0.7, 0.2, 0.1};
  const std::vector<double> q{0.5, 0.3, 0.2};
  EXPECT_NEAR(kl_divergence(p, q), 0.085122825957221644016, 1e-15);
  EXPECT_EQ(kl_divergence(p, p), 0.0);
}

TEST(KlDivergence, ZeroTeacherMassContributesNothing) {
  const std::vector<double> p{1.0, 0.0};
  const std::vector<double> q{0.5, 0.5};
  EXPECT_NEAR(kl_divergence(p, q), std::log(2.0), 1e-15);
}

TEST(KlDivergence, FloorKeepsZeroStudentMassFinite) {
  const std::vector<double> p{0.5, 0.5};
  const std::vector<double> q{1.0, 0.0};
  const double kl = kl_divergence(p, q);
  EXPECT_TRUE(std::isfinite(kl));
  EXPECT_NEAR(kl, 0.5 * std::log(0.5) + 0.5 * (std::log(0.5) - std::log(kProbFloor)), 1e-12);
}

TEST(KlDivergence, RejectsNonDistributions) {
  const std::vector<double> p{0.7, 0.7};
  const std::vector<double> q{0.5, 0.5};
  EXPECT_THROW(kl_divergence(p, q), Error);
  EXPECT_THROW(kl_divergence(q, std::vector<double>{1.0}), Error);
}

TEST(CrossEntropy, MatchesReference) {
  const std::vector<double> z{2.0, 1.0, 0.5};
  EXPECT_NEAR(cross_entropy(z, 1), 1.4643687841079448416, 1e-15);
  EXPECT_THROW(cross_entropy(z, 3), Error);
}

TEST(Argmax, LowestIndexWinsTies) {
  EXPECT_EQ(argmax(std::vector<double>{0.1, 0.5, 0.5}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{0.0, 0.0, 0.0}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{-1.0, -2.0}), 0u);
}

}  // namespace
}  // namespace hgmd
