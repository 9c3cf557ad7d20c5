#include "hgmd/student.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "hgmd/error.hpp"
#include "hgmd/rng.hpp"

namespace hgmd {

void DistillConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw_config("tau must be > 0");
  if (!(beta >= 0.0 && beta <= 1.0)) throw_config("beta must be in [0, 1]");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw_config("alpha must be > 0");
  if (epochs < 1) throw_config("distill epochs must be >= 1");
  eta.validate();
}

namespace {

[[noreturn]] void report_non_finite(std::uint32_t epoch, const DenseMatrix& student,
                                    const DenseMatrix& teacher, const char* what) {
  std::size_t node = 0;
  for (; node < student.rows(); ++node) {
    bool ok = true;
    for (double v : student.row(node)) ok = ok && std::isfinite(v);
    for (double v : teacher.row(node)) ok = ok && std::isfinite(v);
    if (!ok) break;
  }
  std::string where = node < student.rows() ? ", first non-finite logits at node " + std::to_string(node) : "";
  throw_numeric(std::string(what) + " is not finite at epoch " + std::to_string(epoch) + where);
}

std::uint32_t resolve_snapshot_epoch(std::int64_t requested, std::uint32_t epochs) {
  const std::int64_t e = requested < 0 ? static_cast<std::int64_t>(epochs) + requested : requested;
  if (e < 0 || e >= static_cast<std::int64_t>(epochs)) throw_config("snapshot_epoch outside the run");
  return static_cast<std::uint32_t>(e);
}

}  // namespace

StudentResult train_student(const Dataset& ds, const DenseMatrix& teacher_logits,
                            const StudentConfig& config, std::uint64_t seed) {
  validate_dataset(ds);
  const DistillConfig& dc = config.distill;
  dc.validate();
  if (teacher_logits.rows() != ds.num_nodes() || teacher_logits.cols() != ds.num_classes()) {
    throw_config("teacher logits are " + std::to_string(teacher_logits.rows()) + "x" +
                 std::to_string(teacher_logits.cols()) + ", dataset needs " + std::to_string(ds.num_nodes()) +
                 "x" + std::to_string(ds.num_classes()));
  }
  if (!teacher_logits.all_finite()) throw_numeric("teacher logits are not finite");

  const Graph& g = ds.graph;
  const KdOptions kd{dc.tau, dc.kd_tau_squared};
  const bool sampled = uses_subgraphs(dc.scheme);
  const std::uint32_t snapshot_epoch = resolve_snapshot_epoch(dc.snapshot_epoch, dc.epochs);
  const std::uint32_t window_start = dc.epochs > dc.asymmetry_window ? dc.epochs - dc.asymmetry_window : 0;

  // Z is frozen: teacher entropies and edge similarities are computed once.
  const auto teacher_entropy = row_entropies(teacher_logits, dc.tau);
  const auto similarities = sampled ? edge_similarities(teacher_logits, g) : std::vector<double>{};

  // Student init/dropout streams must not coincide with the teacher's for the same seed.
  const std::uint64_t model_seed = mix64(seed ^ 0x73747564656e74ULL);
  MlpModel model(ds.feature_dim(), ds.num_classes(), config.arch, model_seed);
  Adam adam(config.optim);
  const auto params = model.stack().parameters();

  StudentResult result;
  double best_val = -1.0;
  DenseMatrix eval_logits = model.forward(ds.features);
  ForwardCache cache;
  DenseMatrix ce_grad;
  DenseMatrix kd_grad;

  for (std::uint32_t epoch = 0; epoch < dc.epochs; ++epoch) {
    HardnessScores scores{teacher_entropy, row_entropies(eval_logits, dc.tau), dc.tau};
    const double eta = dc.eta.at(epoch);

    LossReport report;
    report.epoch = epoch;
    report.eta = eta;
    report.mean_student_entropy =
        std::accumulate(scores.student_entropy.begin(), scores.student_entropy.end(), 0.0) /
        static_cast<double>(ds.num_nodes());

    SamplingProbabilities probs;
    SubgraphSet subgraphs;
    if (sampled) {
      probs = sampling_probabilities(g, similarities, scores, eta);
      subgraphs = sample_subgraphs(probs, g, seed, epoch);
      report.mean_subgraph_size = subgraphs.mean_size();
      if (epoch >= window_start) result.memberships.push_back({epoch, membership_bits(subgraphs, g)});
      if (epoch == snapshot_epoch) {
        result.snapshot = EdgeSnapshot{epoch, probs.values, similarities, scores.teacher_entropy,
                                       scores.student_entropy};
      }
    }

    model.stack().zero_grad();
    const DenseMatrix logits = model.forward(ds.features, DropoutKey{model_seed, epoch}, &cache);

    report.ce = masked_cross_entropy(logits, ds.labels, ds.splits.train, &ce_grad);
    switch (dc.scheme) {
      case Scheme::Glnn:
        report.kd = loss_glnn(teacher_logits, logits, kd, &kd_grad);
        break;
      case Scheme::LossWeight:
        report.kd = loss_weighting(teacher_logits, logits, scores.teacher_entropy, scores.student_entropy, kd,
                                   &kd_grad);
        break;
      case Scheme::HgmdWeight:
        report.kd = loss_hgmd_weight(teacher_logits, logits, subgraphs, probs, kd,
                                     dc.strict_literal_weight ? WeightTarget::StrictLiteral : WeightTarget::Member,
                                     &kd_grad);
        break;
      case Scheme::HgmdMixup: {
        const auto lambdas = draw_mixup_lambdas(subgraphs, dc.alpha, seed, epoch);
        report.kd = loss_hgmd_mixup(teacher_logits, logits, subgraphs, probs, lambdas, kd, &kd_grad);
        break;
      }
    }
    report.total = total_loss(report.ce, report.kd, dc.beta);
    if (!std::isfinite(report.total)) report_non_finite(epoch, logits, teacher_logits, "student loss");

    DenseMatrix grad(logits.rows(), logits.cols());
    for (std::size_t k = 0; k < grad.size(); ++k) {
      grad.values()[k] = dc.beta * ce_grad.values()[k] + (1.0 - dc.beta) * kd_grad.values()[k];
    }
    model.backward(cache, grad);
    adam.step(params);
    result.log.push_back(report);

    eval_logits = model.forward(ds.features);
    if (!eval_logits.all_finite()) report_non_finite(epoch, eval_logits, teacher_logits, "student logits");
    const double val = accuracy(eval_logits, ds.labels, ds.splits.val);
    if (val > best_val) {
      best_val = val;
      result.best_epoch = epoch;
      result.logits = eval_logits;
      result.model = model;
    }
  }
  result.accuracy = evaluate_splits(result.logits, ds);
  return result;
}

}  // namespace hgmd
