#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "hgmd/distill.hpp"
#include "hgmd/error.hpp"
#include "hgmd/grad_check.hpp"
#include "hgmd/models.hpp"
#include "test_util.hpp"

namespace hgmd {
namespace {

// Three-node path 0-1-2 with hand-set logits, probabilities, members and
// lambdas. CSR slots: (0,1)=0 (1,0)=1 (1,2)=2 (2,1)=3.
struct PathFixture {
  Graph g = test::path_graph(3);
  DenseMatrix z{3, 3, {2, 1, 0, 0.5, 1.5, -0.5, -1, 0, 2}};
  DenseMatrix h{3, 3, {1, 0.5, 0, 0, 1, 0.2, 0.3, -0.2, 0.8}};
  SamplingProbabilities p{{0.3, 0.6, 0.9, 0.2}};
  SubgraphSet sub;
  std::vector<double> lambdas{0, 0.25, 0, 0.5, 0.75, 0};
  KdOptions kd{2.0, false};

  PathFixture() {
    sub.offsets = {0, 2, 5, 6};
    sub.members = {0, 1, 1, 0, 2, 2};
    sub.slots = {kNoEdge, 0, kNoEdge, 1, 2, kNoEdge};
  }
};

TEST(Losses, MatchReferenceValues) {
  const PathFixture f;
  EXPECT_NEAR(loss_glnn(f.z, f.h, f.kd, nullptr), 0.054629589132984350872, 1e-15);
  EXPECT_NEAR(loss_weighting(f.z, f.h, f.kd, nullptr), 0.03727472384951490198, 1e-15);
  EXPECT_NEAR(loss_hgmd_weight(f.z, f.h, f.sub, f.p, f.kd, WeightTarget::Member, nullptr), 0.08059101316065613283,
              1e-15);
  EXPECT_NEAR(loss_hgmd_weight(f.z, f.h, f.sub, f.p, f.kd, WeightTarget::StrictLiteral, nullptr),
              0.050693187262793262375, 1e-15);
  EXPECT_NEAR(loss_hgmd_mixup(f.z, f.h, f.sub, f.p, f.lambdas, f.kd, nullptr), 0.058841686880298544781, 1e-15);
}

TEST(Losses, TauSquaredScalesEveryScheme) {
  const PathFixture f;
  const KdOptions sq{2.0, true};
  EXPECT_NEAR(loss_glnn(f.z, f.h, sq, nullptr), 4.0 * loss_glnn(f.z, f.h, f.kd, nullptr), 1e-15);
  EXPECT_NEAR(loss_hgmd_mixup(f.z, f.h, f.sub, f.p, f.lambdas, sq, nullptr),
              4.0 * loss_hgmd_mixup(f.z, f.h, f.sub, f.p, f.lambdas, f.kd, nullptr), 1e-15);
}

TEST(Losses, IdenticalLogitsGiveZeroGlnn) {
  const PathFixture f;
  DenseMatrix grad;
  EXPECT_NEAR(loss_glnn(f.z, f.z, f.kd, &grad), 0.0, 1e-16);
  for (double v : grad.values()) EXPECT_NEAR(v, 0.0, 1e-16);
}

TEST(Losses, RejectMalformedInputs) {
  const PathFixture f;
  EXPECT_THROW(loss_glnn(f.z, DenseMatrix(3, 2), f.kd, nullptr), Error);
  EXPECT_THROW(loss_hgmd_mixup(f.z, f.h, f.sub, f.p, std::vector<double>{0.5}, f.kd, nullptr), Error);
  SubgraphSet bad = f.sub;
  bad.members[0] = 1;
  EXPECT_THROW(loss_hgmd_weight(f.z, f.h, bad, f.p, f.kd, WeightTarget::Member, nullptr), Error);
  EXPECT_THROW(total_loss(1.0, 1.0, 1.5), Error);
  EXPECT_DOUBLE_EQ(total_loss(2.0, 4.0, 0.25), 3.5);
}

// dL/dH against central differences with p, subgraphs and lambdas frozen.
using LossFn = std::function<double(const DenseMatrix&, DenseMatrix*)>;

double logit_grad_error(const LossFn& loss, DenseMatrix h) {
  Parameter param("h", std::move(h));
  std::vector<Parameter*> params{&param};
  return grad_check([&] { return loss(param.value, &param.grad); }, params).max_rel_error;
}

struct FiveNodeFixture {
  Graph g = test::five_node_graph();
  DenseMatrix z;
  DenseMatrix h;
  SamplingProbabilities p;
  SubgraphSet sub;
  std::vector<double> lambdas;

  explicit FiveNodeFixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    z = test::random_matrix(5, 3, rng, 1.5);
    h = test::random_matrix(5, 3, rng, 1.5);
    p = sampling_probabilities(z, h, g, 1.0, 2.0);
    for (double& v : p.values) v = 0.2 + 0.6 * v;  // keep a mix of members in and out
    sub = sample_subgraphs(p, g, seed, 0);
    lambdas = draw_mixup_lambdas(sub, 0.4, seed, 0);
  }
};

TEST(Gradients, EverySchemeMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const FiveNodeFixture f(seed);
    for (double tau : {1.0, 2.0}) {
      const KdOptions kd{tau, seed % 2 == 1};
      const auto scores = hardness_scores(f.z, f.h, tau);  // frozen, as in training
      const std::vector<std::pair<const char*, LossFn>> losses{
          {"glnn", [&](const DenseMatrix& h, DenseMatrix* g) { return loss_glnn(f.z, h, kd, g); }},
          {"loss_weight",
           [&](const DenseMatrix& h, DenseMatrix* g) {
             return loss_weighting(f.z, h, scores.teacher_entropy, scores.student_entropy, kd, g);
           }},
          {"hgmd_weight",
           [&](const DenseMatrix& h, DenseMatrix* g) {
             return loss_hgmd_weight(f.z, h, f.sub, f.p, kd, WeightTarget::Member, g);
           }},
          {"hgmd_weight_strict",
           [&](const DenseMatrix& h, DenseMatrix* g) {
             return loss_hgmd_weight(f.z, h, f.sub, f.p, kd, WeightTarget::StrictLiteral, g);
           }},
          {"hgmd_mixup",
           [&](const DenseMatrix& h, DenseMatrix* g) {
             return loss_hgmd_mixup(f.z, h, f.sub, f.p, f.lambdas, kd, g);
           }},
      };
      for (const auto& [name, loss] : losses) {
        EXPECT_LT(logit_grad_error(loss, f.h), 1e-4) << name << " seed " << seed << " tau " << tau;
      }
    }
  }
}

TEST(Gradients, SchemeLossThroughMlpMatchesFiniteDifferences) {
  const FiveNodeFixture f(7);
  const Dataset ds = test::five_node_dataset();
  MlpModel mlp(3, 3, LayerStackConfig{2, 6, 0.25}, 1);
  auto params = mlp.stack().parameters();
  const KdOptions kd{1.5, false};
  auto loss = [&] {
    mlp.stack().zero_grad();
    ForwardCache cache;
    const DenseMatrix h = mlp.forward(ds.features, DropoutKey{1, 1}, &cache);
    DenseMatrix grad;
    const double l = loss_hgmd_mixup(f.z, h, f.sub, f.p, f.lambdas, kd, &grad);
    mlp.backward(cache, grad);
    return l;
  };
  EXPECT_LT(grad_check(loss, params).max_rel_error, 1e-4);
}

bool bitwise_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

TEST(ReductionIdentity, SingletonSubgraphsEqualGlnnBitwise) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng() % 12;
    const std::size_t c = 2 + rng() % 5;
    const DenseMatrix z = test::random_matrix(n, c, rng, 3.0);
    const DenseMatrix h = test::random_matrix(n, c, rng, 3.0);
    const SubgraphSet single = singleton_subgraphs(static_cast<NodeId>(n));
    const SamplingProbabilities none{};
    const std::vector<double> lambdas(n, 0.0);
    const KdOptions kd{0.5 + static_cast<double>(t % 3), t % 2 == 0};

    DenseMatrix g_glnn, g_weight, g_mixup;
    const double glnn = loss_glnn(z, h, kd, &g_glnn);
    const double weight = loss_hgmd_weight(z, h, single, none, kd, WeightTarget::Member, &g_weight);
    const double mixup = loss_hgmd_mixup(z, h, single, none, lambdas, kd, &g_mixup);
    ASSERT_TRUE(bitwise_equal(glnn, weight)) << glnn << " vs " << weight;
    ASSERT_TRUE(bitwise_equal(glnn, mixup)) << glnn << " vs " << mixup;
    ASSERT_EQ(g_glnn, g_weight);
    ASSERT_EQ(g_glnn, g_mixup);
  }
}

TEST(Subgraphs, TargetFirstAndMembersAreNeighbors) {
  const FiveNodeFixture f(1);
  for (NodeId i = 0; i < 5; ++i) {
    const auto members = f.sub.members_of(i);
    ASSERT_FALSE(members.empty());
    EXPECT_EQ(members[0], i);
    EXPECT_EQ(f.sub.slots_of(i)[0], kNoEdge);
    for (std::size_t k = 1; k < members.size(); ++k) {
      EXPECT_EQ(f.g.edge_slot(i, members[k]), f.sub.slots_of(i)[k]);
    }
    EXPECT_EQ(f.sub.sample(i).target, i);
  }
}

TEST(Subgraphs, ZeroAndNearOneProbabilities) {
  const Graph g = test::five_node_graph();
  const SamplingProbabilities zero{std::vector<double>(g.num_directed_edges(), 0.0)};
  const SamplingProbabilities high{std::vector<double>(g.num_directed_edges(), sampling_probability(0.0))};
  for (std::uint64_t e = 0; e < 20; ++e) {
    const SubgraphSet s0 = sample_subgraphs(zero, g, 3, e);
    EXPECT_EQ(s0.members, singleton_subgraphs(5).members);
    EXPECT_EQ(s0.mean_size(), 1.0);
    const SubgraphSet s1 = sample_subgraphs(high, g, 3, e);
    EXPECT_EQ(s1.members, full_subgraphs(g).members);
    EXPECT_EQ(s1.slots, full_subgraphs(g).slots);
  }
}

TEST(Subgraphs, DeterministicPerSeedEpochAndNode) {
  const FiveNodeFixture f(2);
  const SubgraphSet a = sample_subgraphs(f.p, f.g, 9, 4);
  const SubgraphSet b = sample_subgraphs(f.p, f.g, 9, 4);
  EXPECT_EQ(a.members, b.members);
  EXPECT_EQ(a.slots, b.slots);
  // Node 4's draws do not depend on other nodes' probabilities.
  SamplingProbabilities changed = f.p;
  for (std::size_t s = f.g.offsets()[0]; s < f.g.offsets()[1]; ++s) changed.values[s] = 0.0;
  const SubgraphSet c = sample_subgraphs(changed, f.g, 9, 4);
  const auto m4a = a.members_of(4);
  const auto m4c = c.members_of(4);
  EXPECT_TRUE(std::equal(m4a.begin(), m4a.end(), m4c.begin(), m4c.end()));
}

TEST(Subgraphs, InclusionFrequenciesWithinBinomialBounds) {
  const Graph g = test::five_node_graph();
  SamplingProbabilities p;
  for (std::size_t s = 0; s < g.num_directed_edges(); ++s) p.values.push_back(0.05 + 0.9 * s / 10.0);
  constexpr int kTrials = 10000;
  std::vector<int> counts(p.values.size(), 0);
  for (int t = 0; t < kTrials; ++t) {
    const auto bits = membership_bits(sample_subgraphs(p, g, 21, static_cast<std::uint64_t>(t)), g);
    for (std::size_t s = 0; s < bits.size(); ++s) counts[s] += bits[s];
  }
  for (std::size_t s = 0; s < counts.size(); ++s) {
    const double q = p.values[s];
    const double sigma = std::sqrt(kTrials * q * (1 - q));
    EXPECT_LE(std::abs(counts[s] - kTrials * q), 3 * sigma) << "slot " << s;
  }
}

TEST(Mixup, InterpolatesBetweenEndpoints) {
  const std::vector<double> zi{1, 2};
  const std::vector<double> zj{3, -2};
  EXPECT_EQ(mixup_sample(zi, zj, 0.8, 0.0).u, zi);
  EXPECT_EQ(mixup_sample(zi, zj, 1.0, 1.0).u, zj);
  const MixupDraw d = mixup_sample(zi, zj, 0.5, 0.5, 4, 7);
  EXPECT_DOUBLE_EQ(d.u[0], 0.25 * 3 + 0.75 * 1);
  EXPECT_DOUBLE_EQ(d.u[1], 0.25 * -2 + 0.75 * 2);
  EXPECT_EQ(d.i, 4u);
  EXPECT_EQ(d.j, 7u);
  EXPECT_THROW(mixup_sample(zi, zj, 1.5, 0.5), Error);
  Rng rng(1);
  const MixupDraw r = mixup_sample(zi, zj, 1.0, 0.4, rng);
  EXPECT_GE(r.lambda, 0.0);
  EXPECT_LE(r.lambda, 1.0);
}

TEST(Mixup, LambdasFollowSymmetricBeta) {
  const Graph g = test::five_node_graph();
  const SubgraphSet full = full_subgraphs(g);
  const double alpha = 0.4;
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::uint64_t e = 0; e < 4000; ++e) {
    const auto lambdas = draw_mixup_lambdas(full, alpha, 5, e);
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      if (full.slots[k] == kNoEdge) {
        ASSERT_EQ(lambdas[k], 0.0);
        continue;
      }
      ASSERT_GE(lambdas[k], 0.0);
      ASSERT_LE(lambdas[k], 1.0);
      sum += lambdas[k];
      sq += lambdas[k] * lambdas[k];
      ++n;
    }
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  const double expected_var = 1.0 / (4.0 * (2.0 * alpha + 1.0));
  EXPECT_NEAR(mean, 0.5, 0.01);
  EXPECT_NEAR(var, expected_var, 0.01);
  EXPECT_EQ(draw_mixup_lambdas(full, alpha, 5, 3), draw_mixup_lambdas(full, alpha, 5, 3));
}

TEST(Scheme, ParsesBothSpellings) {
  EXPECT_EQ(parse_scheme("hgmd-mixup"), Scheme::HgmdMixup);
  EXPECT_EQ(parse_scheme("hgmd_weight"), Scheme::HgmdWeight);
  EXPECT_EQ(parse_scheme("loss-weight"), Scheme::LossWeight);
  EXPECT_EQ(parse_scheme("glnn"), Scheme::Glnn);
  EXPECT_THROW(parse_scheme("mixup"), Error);
  EXPECT_EQ(scheme_name(Scheme::HgmdMixup), "hgmd_mixup");
  EXPECT_TRUE(uses_subgraphs(Scheme::HgmdWeight));
  EXPECT_FALSE(uses_subgraphs(Scheme::LossWeight));
}

}  // namespace
}  // namespace hgmd
