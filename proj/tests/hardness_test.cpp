#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>
#include <random>

#include "hgmd/error.hpp"
#include "hgmd/hardness.hpp"
#include "test_util.hpp"

namespace hgmd {
namespace {

using Big = boost::multiprecision::cpp_dec_float_50;

Big big_entropy(std::span<const double> z, double tau) {
  Big m = z[0];
  for (double v : z) m = std::max(m, Big(v));
  std::vector<Big> e;
  Big s = 0;
  for (double v : z) {
    e.push_back(boost::multiprecision::exp((Big(v) - m) / Big(tau)));
    s += e.back();
  }
  Big h = 0;
  for (const Big& v : e) {
    const Big p = v / s;
    h -= p * boost::multiprecision::log(p);
  }
  return h;
}

// Independent recomputation of the sampling probability from raw logits.
double big_probability(std::span<const double> zi, std::span<const double> zj, std::span<const double> hi,
                       double tau, double eta) {
  Big dot = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < zi.size(); ++k) {
    dot += Big(zi[k]) * Big(zj[k]);
    na += Big(zi[k]) * Big(zi[k]);
    nb += Big(zj[k]) * Big(zj[k]);
  }
  Big d = dot / boost::multiprecision::sqrt(na * nb);
  if (d < 0) d = 0;
  if (d > 1) d = 1;
  Big hzj = big_entropy(zj, tau);
  if (hzj < Big(1e-6)) hzj = Big(1e-6);
  const Big r = boost::multiprecision::exp(-Big(eta) * d *
                                           boost::multiprecision::sqrt(big_entropy(hi, tau) * big_entropy(zi, tau)) /
                                           hzj);
  return static_cast<double>(Big(1) - r);
}

TEST(Entropy, MatchesReferenceAndBounds) {
  EXPECT_NEAR(entropy(std::vector<double>{1, 2, 3}, 2.0), 1.0201913367268313514, 1e-15);
  EXPECT_NEAR(entropy(std::vector<double>{4, 4, 4, 4}, 1.0), std::log(4.0), 1e-15);
  EXPECT_NEAR(entropy(std::vector<double>{500, 0, 0}, 1.0), 0.0, 1e-15);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 500; ++t) {
    const DenseMatrix z = test::random_matrix(1, 5, rng, 10.0);
    const double h = entropy(z.row(0), 0.5);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(5.0));
  }
}

TEST(Cosine, BasicCases) {
  EXPECT_NEAR(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{2, 0}), 1.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 3}), 0.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(std::vector<double>{1, 1}, std::vector<double>{-1, -1}), -1.0, 1e-15);
  EXPECT_EQ(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 2}), 0.0);
}

TEST(DistillationHardness, MatchesReferenceValue) {
  const std::vector<double> zi{2, 1, 0};
  const std::vector<double> zj{1.5, 1, 0.2};
  const double r = distillation_hardness(zi, zj, 0.8, entropy(zi, 1.0), entropy(zj, 1.0), 5.0);
  EXPECT_NEAR(r, 0.016520835740434162059, 1e-15);
  EXPECT_NEAR(sampling_probability(r), 0.98347916425956583794, 1e-15);
}

TEST(DistillationHardness, NegativeSimilarityMeansNoSampling) {
  const std::vector<double> zi{2, 0};
  const std::vector<double> zj{-2, 0.1};
  EXPECT_EQ(distillation_hardness(zi, zj, 0.5, 0.5, 0.5, 5.0), 1.0);
  EXPECT_EQ(sampling_probability(1.0), 0.0);
}

TEST(DistillationHardness, GuardKeepsZeroNeighborEntropyFinite) {
  const double r = distillation_hardness(1.0, 0.6, 0.6, 0.0, 1.0);
  EXPECT_TRUE(std::isfinite(r));
  EXPECT_GE(r, 0.0);
  EXPECT_LT(sampling_probability(r), 1.0);
  EXPECT_LT(sampling_probability(0.0), 1.0);
}

TEST(DistillationHardness, RejectsBadInputs) {
  EXPECT_THROW(distillation_hardness(0.5, 0.5, 0.5, 0.5, 0.0), Error);
  EXPECT_THROW(distillation_hardness(0.5, -0.1, 0.5, 0.5, 1.0), Error);
  EXPECT_THROW(distillation_hardness(0.5, NAN, 0.5, 0.5, 1.0), Error);
}

TEST(SamplingProbabilities, AgreeWithHighPrecisionRecomputation) {
  std::mt19937_64 rng(2);
  const Graph g = test::five_node_graph();
  for (int t = 0; t < 20; ++t) {
    const DenseMatrix z = test::random_matrix(5, 4, rng, 2.0);
    const DenseMatrix h = test::random_matrix(5, 4, rng, 2.0);
    const double tau = 0.5 + static_cast<double>(t % 4);
    const SamplingProbabilities p = sampling_probabilities(z, h, g, tau, 3.0);
    ASSERT_EQ(p.values.size(), g.num_directed_edges());
    for (NodeId i = 0; i < 5; ++i) {
      for (std::size_t s = g.offsets()[i]; s < g.offsets()[i + 1]; ++s) {
        const NodeId j = g.targets()[s];
        EXPECT_NEAR(p.at(s), big_probability(z.row(i), z.row(j), h.row(i), tau, 3.0), 1e-12);
      }
    }
  }
}

// Each trial perturbs one input of r upward and checks the direction of p.
TEST(DistillationHardness, MonotoneInEveryArgument) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const double d = u(rng), hh = u(rng), hzi = u(rng), hzj = u(rng), eta = 0.1 + 5 * u(rng);
    const double bump = 0.05 + u(rng) * 0.5;
    const double p0 = sampling_probability(distillation_hardness(d, hh, hzi, hzj, eta));
    violations += sampling_probability(distillation_hardness(d, hh, hzi + bump, hzj, eta)) < p0;
    violations += sampling_probability(distillation_hardness(d, hh + bump, hzi, hzj, eta)) < p0;
    violations += sampling_probability(distillation_hardness(std::min(1.0, d + bump), hh, hzi, hzj, eta)) < p0;
    violations += sampling_probability(distillation_hardness(d, hh, hzi, hzj + bump, eta)) > p0;
  }
  EXPECT_EQ(violations, 0);
}

TEST(EtaSchedule, ContinuousExponentialDecay) {
  const EtaSchedule s{};
  EXPECT_EQ(s.at(0), 5.0);
  EXPECT_DOUBLE_EQ(s.at(250), 2.5);
  EXPECT_DOUBLE_EQ(s.at(500), 1.25);
  EXPECT_NEAR(s.at(125), 3.535533905932737622, 1e-14);
  EXPECT_NEAR(s.at(600), 0.94732285406899880147, 1e-14);
  EXPECT_EQ(eta_at(s, 250), s.at(250));
  EXPECT_THROW((EtaSchedule{0.0, 250, 0.5}.validate()), Error);
  EXPECT_THROW((EtaSchedule{5.0, 0.0, 0.5}.validate()), Error);
  EXPECT_THROW((EtaSchedule{5.0, 250, 1.5}.validate()), Error);
}

TEST(InvariantEntropy, ConstantTeacherGivesZero) {
  const Dataset ds = test::five_node_dataset();
  const NormalizedAdjacency adj = normalize_adjacency(ds.graph);
  GcnModel gcn(3, 2, LayerStackConfig{2, 4, 0.5}, 0);
  for (auto* p : gcn.stack().parameters()) p->value.fill(0.0);
  gcn.stack().bias(1).value(0, 0) = 1.5;
  const auto rho = invariant_entropy(gcn, adj, ds.features, InvariantEntropyConfig{0.1, 16, 3}, 1.0);
  ASSERT_EQ(rho.size(), 5u);
  for (double v : rho) EXPECT_EQ(v, 0.0);
}

TEST(InvariantEntropy, SeededReplayIsExact) {
  const Dataset ds = test::five_node_dataset();
  const NormalizedAdjacency adj = normalize_adjacency(ds.graph);
  const GcnModel gcn(3, 2, LayerStackConfig{2, 8, 0.5}, 4);
  const InvariantEntropyConfig cfg{0.2, 8, 17};
  const auto a = invariant_entropy(gcn, adj, ds.features, cfg, 1.0);
  const auto b = invariant_entropy(gcn, adj, ds.features, cfg, 1.0);
  EXPECT_EQ(a, b);
  for (double v : a) EXPECT_GE(v, 0.0);
  const auto c = invariant_entropy(gcn, adj, ds.features, InvariantEntropyConfig{0.2, 8, 18}, 1.0);
  EXPECT_NE(a, c);
}

}  // namespace
}  // namespace hgmd
