#ifndef HGMD_HARDNESS_HPP
#define HGMD_HARDNESS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "hgmd/graph.hpp"
#include "hgmd/matrix.hpp"
#include "hgmd/models.hpp"

namespace hgmd {

/// Lower bound applied to the neighbor entropy in the hardness denominator.
inline constexpr double kEntropyGuard = 1e-6;

/// Entropy of softmax(z / tau), in [0, log C].
double entropy(std::span<const double> logit_row, double tau);
std::vector<double> row_entropies(const DenseMatrix& logits, double tau);

/// Plain cosine similarity; 0 when either vector is all zeros.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Knowledge hardness of every node, for teacher and student.
struct HardnessScores {
  std::vector<double> teacher_entropy;
  std::vector<double> student_entropy;
  double tau = 1.0;
};
HardnessScores hardness_scores(const DenseMatrix& teacher_logits, const DenseMatrix& student_logits,
                               double tau);

/// r_{j->i} = exp(-eta * D * sqrt(H(h_i) H(z_i)) / max(H(z_j), guard)), with
/// D = cosine(z_i, z_j) clamped to [0, 1]. Result in (0, 1].
double distillation_hardness(std::span<const double> z_i, std::span<const double> z_j,
                             double student_entropy_i, double teacher_entropy_i,
                             double teacher_entropy_j, double eta);
/// Same, with the clamped similarity already computed.
double distillation_hardness(double similarity, double student_entropy_i, double teacher_entropy_i,
                             double teacher_entropy_j, double eta);

/// 1 - r, capped just below 1 so that off-diagonal p stays in [0, 1).
double sampling_probability(double hardness);

/// p_{j->i} for every CSR slot (i, j) of the graph; p_{i->i} = 1 is implicit.
struct SamplingProbabilities {
  std::vector<double> values;

  static constexpr double self() noexcept { return 1.0; }
  double at(std::size_t slot) const { return values.at(slot); }
};

/// Clamped teacher-logit cosine similarity for every CSR slot (i, j).
std::vector<double> edge_similarities(const DenseMatrix& teacher_logits, const Graph& g);

SamplingProbabilities sampling_probabilities(const DenseMatrix& teacher_logits,
                                             const DenseMatrix& student_logits, const Graph& g,
                                             double tau, double eta);
/// Variant reusing precomputed similarities and entropies, O(|E|).
SamplingProbabilities sampling_probabilities(const Graph& g, std::span<const double> similarities,
                                             const HardnessScores& scores, double eta);

/// eta(t) = eta0 * decay_rate^(t / decay_step), continuous exponent.
struct EtaSchedule {
  double eta0 = 5.0;
  double decay_step = 250.0;
  double decay_rate = 0.5;

  void validate() const;
  double at(std::uint64_t epoch) const;
};

inline double eta_at(const EtaSchedule& schedule, std::uint64_t epoch) { return schedule.at(epoch); }

struct InvariantEntropyConfig {
  double delta = 0.1;             // noise stddev
  std::uint32_t num_samples = 16;  // Monte-Carlo draws
  std::uint64_t seed = 0;
};

/// rho_i = E[(H(z'_i) - H(z_i))^2] / delta^2 with X' = X + N(0, delta^2 I),
/// estimated from `num_samples` draws; teacher run in eval mode.
std::vector<double> invariant_entropy(const GcnModel& teacher, const NormalizedAdjacency& adj,
                                      const DenseMatrix& x, const InvariantEntropyConfig& config,
                                      double tau);

}  // namespace hgmd

#endif  // HGMD_HARDNESS_HPP
