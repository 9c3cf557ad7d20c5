// Acceptance checks that run on fixtures: prints PASS/FAIL per criterion and
// exits non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hgmd/distill.hpp"
#include "hgmd/grad_check.hpp"
#include "hgmd/harness.hpp"
#include "hgmd/hardness.hpp"
#include "hgmd/hash.hpp"
#include "hgmd/models.hpp"
#include "../test_util.hpp"

namespace hgmd {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0 = no runtime gate
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1: scheme losses and teacher CE against central differences.
Outcome gradient_fidelity() {
  const Dataset ds = test::five_node_dataset();
  double worst = 0.0;
  std::string worst_name;
  auto note = [&](const char* name, double err) {
    if (err > worst || worst_name.empty()) {
      worst = err;
      worst_name = name;
    }
  };

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const DenseMatrix z = test::random_matrix(5, 3, rng, 1.5);
    Parameter h("h", test::random_matrix(5, 3, rng, 1.5));
    std::vector<Parameter*> params{&h};
    SamplingProbabilities p = sampling_probabilities(z, h.value, ds.graph, 1.0, 2.0);
    for (double& v : p.values) v = 0.2 + 0.6 * v;
    const SubgraphSet sub = sample_subgraphs(p, ds.graph, seed, 0);
    const auto lambdas = draw_mixup_lambdas(sub, 0.4, seed, 0);
    const HardnessScores scores = hardness_scores(z, h.value, 1.0);
    const KdOptions kd{1.0, false};

    note("glnn", grad_check([&] { return loss_glnn(z, h.value, kd, &h.grad); }, params).max_rel_error);
    note("loss_weight", grad_check([&] {
                          return loss_weighting(z, h.value, scores.teacher_entropy, scores.student_entropy, kd,
                                                &h.grad);
                        },
                                   params)
                            .max_rel_error);
    note("hgmd_weight", grad_check([&] {
                          return loss_hgmd_weight(z, h.value, sub, p, kd, WeightTarget::Member, &h.grad);
                        },
                                   params)
                            .max_rel_error);
    note("hgmd_mixup",
         grad_check([&] { return loss_hgmd_mixup(z, h.value, sub, p, lambdas, kd, &h.grad); }, params)
             .max_rel_error);

    // Teacher CE through a full GCN, dropout mask frozen by its key.
    const NormalizedAdjacency adj = normalize_adjacency(ds.graph);
    GcnModel gcn(3, 2, LayerStackConfig{2, 6, 0.25}, seed);
    auto gparams = gcn.stack().parameters();
    note("teacher_ce", grad_check([&] {
                         gcn.stack().zero_grad();
                         ForwardCache cache;
                         const DenseMatrix logits = gcn.forward(adj, ds.features, DropoutKey{seed, 1}, &cache);
                         DenseMatrix grad;
                         const double l = masked_cross_entropy(logits, ds.labels, ds.splits.train, &grad);
                         gcn.backward(adj, cache, grad);
                         return l;
                       },
                                  gparams)
                           .max_rel_error);
  }
  return {worst < 1e-4, "max relative error " + fmt("%.3g", worst) + " (" + worst_name + ")"};
}

// Scalar recomputation of p_{j->i} in long double, straight from the formula.
long double scalar_probability(std::span<const double> zi, std::span<const double> zj, std::span<const double> hi,
                               double tau, double eta) {
  auto ent = [tau](std::span<const double> v) {
    long double m = v[0];
    for (double x : v) m = std::max<long double>(m, x);
    long double s = 0;
    for (double x : v) s += std::exp((x - m) / tau);
    long double e = 0;
    for (double x : v) {
      const long double q = std::exp((x - m) / tau) / s;
      if (q > 0) e -= q * std::log(q);
    }
    return e;
  };
  long double dot = 0, a = 0, b = 0;
  for (std::size_t k = 0; k < zi.size(); ++k) {
    dot += static_cast<long double>(zi[k]) * zj[k];
    a += static_cast<long double>(zi[k]) * zi[k];
    b += static_cast<long double>(zj[k]) * zj[k];
  }
  const long double d = std::clamp<long double>(dot / std::sqrt(a * b), 0.0L, 1.0L);
  const long double r = std::exp(-eta * d * std::sqrt(ent(hi) * ent(zi)) / std::max<long double>(ent(zj), 1e-6L));
  return 1.0L - r;
}

// 2: per-edge p against the scalar recomputation, then inclusion frequencies.
Outcome probability_oracle() {
  const Graph g = test::five_node_graph();
  const DenseMatrix z(5, 3, {2.0, 1.0, 0.0, 1.5, 1.0, 0.2, 0.3, 0.4, 0.2, -1.0, 0.5, 2.0, 0.1, 0.1, 0.3});
  const DenseMatrix h(5, 3, {1.0, 0.5, 0.0, 0.2, 0.3, 0.1, 0.0, 0.0, 0.1, -0.5, 0.2, 1.0, 0.4, 0.3, 0.2});
  const double tau = 1.0, eta = 3.0;
  const SamplingProbabilities p = sampling_probabilities(z, h, g, tau, eta);
  double max_err = 0.0;
  for (NodeId i = 0; i < 5; ++i) {
    for (std::size_t s = g.offsets()[i]; s < g.offsets()[i + 1]; ++s) {
      const NodeId j = g.targets()[s];
      const long double ref = scalar_probability(z.row(i), z.row(j), h.row(i), tau, eta);
      max_err = std::max(max_err, static_cast<double>(std::fabs(p.at(s) - ref)));
    }
  }
  constexpr int kTrials = 10000;
  std::vector<int> counts(p.values.size(), 0);
  for (int t = 0; t < kTrials; ++t) {
    const auto bits = membership_bits(sample_subgraphs(p, g, 7, static_cast<std::uint64_t>(t)), g);
    for (std::size_t s = 0; s < bits.size(); ++s) counts[s] += bits[s];
  }
  double worst_sigma = 0.0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    const double q = p.values[s];
    const double sigma = std::sqrt(kTrials * q * (1 - q));
    const double dev = std::fabs(counts[s] - kTrials * q);
    worst_sigma = std::max(worst_sigma, sigma > 0 ? dev / sigma : (dev > 0 ? INFINITY : 0.0));
  }
  return {max_err <= 1e-12 && worst_sigma <= 3.0,
          "max |p - scalar| " + fmt("%.3g", max_err) + ", worst deviation " + fmt("%.2f", worst_sigma) + " sigma"};
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// 3: singleton subgraphs reduce both subgraph schemes to GLNN bit for bit.
Outcome reduction_identity() {
  std::mt19937_64 rng(3);
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 10, c = 2 + rng() % 6;
    const DenseMatrix z = test::random_matrix(n, c, rng, 2.5);
    const DenseMatrix h = test::random_matrix(n, c, rng, 2.5);
    const SubgraphSet single = singleton_subgraphs(static_cast<NodeId>(n));
    const std::vector<double> lambdas(n, 0.0);
    const KdOptions kd{0.8 + 0.1 * (t % 5), t % 2 == 1};
    DenseMatrix g0, g1, g2;
    const double l0 = loss_glnn(z, h, kd, &g0);
    const double l1 = loss_hgmd_weight(z, h, single, {}, kd, WeightTarget::Member, &g1);
    const double l2 = loss_hgmd_mixup(z, h, single, {}, lambdas, kd, &g2);
    mismatches += !same_bits(l0, l1) || !same_bits(l0, l2) || !(g0 == g1) || !(g0 == g2);
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 100 fixtures differ"};
}

// 4: p rises with H(z_i), H(h_i), D and falls with H(z_j).
Outcome monotonicity() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const double d = u(rng), hh = u(rng), hzi = u(rng), hzj = u(rng), eta = 0.1 + 5 * u(rng);
    const double bump = 0.05 + 0.5 * u(rng);
    const double p0 = sampling_probability(distillation_hardness(d, hh, hzi, hzj, eta));
    violations += sampling_probability(distillation_hardness(d, hh, hzi + bump, hzj, eta)) < p0;
    violations += sampling_probability(distillation_hardness(d, hh + bump, hzi, hzj, eta)) < p0;
    violations += sampling_probability(distillation_hardness(std::min(1.0, d + bump), hh, hzi, hzj, eta)) < p0;
    violations += sampling_probability(distillation_hardness(d, hh, hzi, hzj + bump, eta)) > p0;
  }
  return {violations == 0, std::to_string(violations) + " violations in 4000 checks"};
}

// Hash of every file under `root`, keyed by relative path.
std::map<std::string, std::string> tree_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = git_blob_hash_file(e.path());
  }
  return out;
}

// 9: two runs of the same config give identical artifacts and reports.
Outcome determinism() {
  test::TempDir dir("acceptance_det");
  SbmParams sp;
  sp.blocks = 3;
  sp.nodes_per_block = 30;
  sp.p_in = 0.2;
  sp.p_out = 0.02;
  sp.noise_std = 1.2;
  sp.seed = 9;
  write_dataset(gen_synthetic_sbm(sp), dir / "data");
  const nlohmann::json j{{"dataset", "data"},
                         {"output_dir", "run"},
                         {"seeds", {0, 1}},
                         {"teacher", {{"hidden", 32}, {"epochs", 60}}},
                         {"student", {{"hidden", 32}}},
                         {"distill", {{"epochs", 60}}},
                         {"invariant_entropy", {{"num_samples", 4}}}};
  RunConfig cfg = RunConfig::from_json(j, dir.path());
  cfg.validate();

  const std::vector<Scheme> all{Scheme::Glnn, Scheme::LossWeight, Scheme::HgmdWeight, Scheme::HgmdMixup};
  std::map<std::string, std::string> files[2];
  std::vector<std::string> reports[2];
  for (int r = 0; r < 2; ++r) {
    fs::remove_all(cfg.output_dir);
    cmd_train_teacher(cfg);
    cmd_distill(cfg, all);
    HardnessReportOptions opt;
    opt.invariant = true;
    reports[r] = {report_buckets(cfg.output_dir), report_asymmetry(cfg.output_dir).dump(),
                  report_hist3d(cfg.output_dir), report_hardness(cfg.output_dir, opt)};
    files[r] = tree_hashes(cfg.output_dir);
  }
  std::size_t differing = 0;
  for (const auto& [name, hash] : files[0]) {
    const auto it = files[1].find(name);
    differing += it == files[1].end() || it->second != hash;
  }
  differing += files[1].size() - std::min(files[1].size(), files[0].size());
  const bool reports_equal = reports[0] == reports[1];
  return {differing == 0 && reports_equal && !files[0].empty(),
          std::to_string(files[0].size()) + " files, " + std::to_string(differing) + " differ; reports " +
              (reports_equal ? "identical" : "differ")};
}

// 10: a constant teacher has zero invariant entropy; seeded replay is exact.
Outcome invariant_entropy_check() {
  const Dataset ds = test::five_node_dataset();
  const NormalizedAdjacency adj = normalize_adjacency(ds.graph);
  GcnModel flat(3, 2, LayerStackConfig{2, 4, 0.5}, 0);
  for (auto* p : flat.stack().parameters()) p->value.fill(0.0);
  flat.stack().bias(1).value(0, 1) = 2.0;
  const auto zero = invariant_entropy(flat, adj, ds.features, InvariantEntropyConfig{0.1, 32, 1}, 1.0);
  bool all_zero = true;
  for (double v : zero) all_zero = all_zero && v == 0.0;

  const GcnModel gcn(3, 2, LayerStackConfig{2, 8, 0.5}, 5);
  const InvariantEntropyConfig cfg{0.2, 16, 42};
  const auto a = invariant_entropy(gcn, adj, ds.features, cfg, 1.0);
  const auto b = invariant_entropy(gcn, adj, ds.features, cfg, 1.0);
  bool any_positive = false;
  for (double v : a) any_positive = any_positive || v > 0.0;
  return {all_zero && a == b && any_positive,
          std::string("constant teacher ") + (all_zero ? "all zero" : "non-zero") + ", replay " +
              (a == b ? "exact" : "differs")};
}

}  // namespace
}  // namespace hgmd

int main() {
  using hgmd::Criterion;
  const std::vector<Criterion> criteria{
      {1, "gradient fidelity", 10.0, hgmd::gradient_fidelity},
      {2, "sampling probability oracle", 30.0, hgmd::probability_oracle},
      {3, "reduction identity", 0.0, hgmd::reduction_identity},
      {4, "monotonicity", 0.0, hgmd::monotonicity},
      {9, "determinism", 0.0, hgmd::determinism},
      {10, "invariant entropy", 0.0, hgmd::invariant_entropy_check},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    hgmd::Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs >= c.budget_seconds) {
      o.pass = false;
      o.detail += "; over the " + hgmd::fmt("%.0f", c.budget_seconds) + " s budget";
    }
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
