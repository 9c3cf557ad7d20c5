#include "hgmd/hardness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "hgmd/error.hpp"
#include "hgmd/rng.hpp"
#include "hgmd/tensor.hpp"

namespace hgmd {

double entropy(std::span<const double> logit_row, double tau) {
  std::vector<double> p(logit_row.size());
  softmax_temp(logit_row, tau, p);
  double h = 0.0;
  for (double pj : p) h -= pj * std::log(std::clamp(pj, kProbFloor, 1.0));
  return std::clamp(h, 0.0, std::log(static_cast<double>(logit_row.size())));
}

std::vector<double> row_entropies(const DenseMatrix& logits, double tau) {
  std::vector<double> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) out[i] = entropy(logits.row(i), tau);
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw_invalid("cosine_similarity: length mismatch");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

HardnessScores hardness_scores(const DenseMatrix& teacher_logits, const DenseMatrix& student_logits,
                               double tau) {
  if (!teacher_logits.same_shape(student_logits)) throw_invalid("hardness: teacher/student shape mismatch");
  return {row_entropies(teacher_logits, tau), row_entropies(student_logits, tau), tau};
}

double distillation_hardness(double similarity, double student_entropy_i, double teacher_entropy_i,
                             double teacher_entropy_j, double eta) {
  if (!std::isfinite(similarity) || !std::isfinite(student_entropy_i) ||
      !std::isfinite(teacher_entropy_i) || !std::isfinite(teacher_entropy_j) || !std::isfinite(eta)) {
    throw_numeric("distillation hardness: non-finite input");
  }
  if (!(eta > 0.0)) throw_invalid("distillation hardness: eta must be > 0");
  if (student_entropy_i < 0.0 || teacher_entropy_i < 0.0 || teacher_entropy_j < 0.0) {
    throw_invalid("distillation hardness: entropies must be >= 0");
  }
  const double d = std::clamp(similarity, 0.0, 1.0);
  const double denom = std::max(teacher_entropy_j, kEntropyGuard);
  return std::exp(-eta * d * std::sqrt(student_entropy_i * teacher_entropy_i) / denom);
}

double distillation_hardness(std::span<const double> z_i, std::span<const double> z_j,
                             double student_entropy_i, double teacher_entropy_i,
                             double teacher_entropy_j, double eta) {
  return distillation_hardness(cosine_similarity(z_i, z_j), student_entropy_i, teacher_entropy_i,
                               teacher_entropy_j, eta);
}

double sampling_probability(double hardness) {
  static constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::min(1.0 - hardness, kBelowOne);
}

std::vector<double> edge_similarities(const DenseMatrix& teacher_logits, const Graph& g) {
  if (teacher_logits.rows() != g.num_nodes()) throw_invalid("edge similarities: logits/graph mismatch");
  std::vector<double> sim(g.num_directed_edges());
  const auto offsets = g.offsets();
  const auto targets = g.targets();
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
      sim[k] = std::clamp(cosine_similarity(teacher_logits.row(i), teacher_logits.row(targets[k])), 0.0, 1.0);
    }
  }
  return sim;
}

SamplingProbabilities sampling_probabilities(const Graph& g, std::span<const double> similarities,
                                             const HardnessScores& scores, double eta) {
  const NodeId n = g.num_nodes();
  if (similarities.size() != g.num_directed_edges() || scores.teacher_entropy.size() != n ||
      scores.student_entropy.size() != n) {
    throw_invalid("sampling probabilities: shape mismatch");
  }
  SamplingProbabilities probs;
  probs.values.resize(g.num_directed_edges());
  const auto offsets = g.offsets();
  const auto targets = g.targets();
  for (NodeId i = 0; i < n; ++i) {
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
      const double r = distillation_hardness(similarities[k], scores.student_entropy[i],
                                             scores.teacher_entropy[i],
                                             scores.teacher_entropy[targets[k]], eta);
      probs.values[k] = sampling_probability(r);
    }
  }
  return probs;
}

SamplingProbabilities sampling_probabilities(const DenseMatrix& teacher_logits,
                                             const DenseMatrix& student_logits, const Graph& g,
                                             double tau, double eta) {
  if (teacher_logits.rows() != g.num_nodes()) throw_invalid("sampling probabilities: logits/graph mismatch");
  const auto scores = hardness_scores(teacher_logits, student_logits, tau);
  return sampling_probabilities(g, edge_similarities(teacher_logits, g), scores, eta);
}

void EtaSchedule::validate() const {
  if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw_config("eta0 must be > 0");
  if (!(decay_step > 0.0)) throw_config("eta decay_step must be > 0");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw_config("eta decay_rate must be in (0, 1]");
}

double EtaSchedule::at(std::uint64_t epoch) const {
  return eta0 * std::pow(decay_rate, static_cast<double>(epoch) / decay_step);
}

std::vector<double> invariant_entropy(const GcnModel& teacher, const NormalizedAdjacency& adj,
                                      const DenseMatrix& x, const InvariantEntropyConfig& config,
                                      double tau) {
  if (config.num_samples == 0) throw_invalid("invariant entropy: num_samples must be >= 1");
  if (!(config.delta > 0.0) || !std::isfinite(config.delta)) {
    throw_invalid("invariant entropy: delta must be > 0");
  }
  const auto base = row_entropies(teacher.forward(adj, x), tau);
  std::vector<double> acc(base.size(), 0.0);
  DenseMatrix noisy(x.rows(), x.cols());
  for (std::uint32_t m = 0; m < config.num_samples; ++m) {
    Rng rng = make_stream(config.seed, StreamSalt::InvariantNoise, m);
    std::normal_distribution<double> noise(0.0, config.delta);
    const auto src = x.values();
    auto dst = noisy.values();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k] + noise(rng);
    const auto perturbed = teacher.forward(adj, noisy);
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double diff = entropy(perturbed.row(i), tau) - base[i];
      acc[i] += diff * diff;
    }
  }
  const double scale = 1.0 / (static_cast<double>(config.num_samples) * config.delta * config.delta);
  for (double& v : acc) v *= scale;
  return acc;
}

}  // namespace hgmd
