#ifndef HGMD_DISTILL_HPP
#define HGMD_DISTILL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgmd/graph.hpp"
#include "hgmd/hardness.hpp"
#include "hgmd/matrix.hpp"
#include "hgmd/rng.hpp"

namespace hgmd {

/// One target node's sampled member set. The target is always the first member.
struct SubgraphSample {
  NodeId target = 0;
  std::span<const NodeId> members;
  std::uint64_t epoch = 0;
};

/// Member sets for every node, flattened. `slots[k]` is the CSR slot of
/// (target, member) used to look up p_{member->target}; kNoEdge for the target itself.
struct SubgraphSet {
  std::uint64_t epoch = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<NodeId> members;
  std::vector<std::size_t> slots;

  NodeId num_targets() const noexcept { return static_cast<NodeId>(offsets.size() - 1); }
  std::size_t size(NodeId i) const noexcept { return offsets[i + 1] - offsets[i]; }
  std::span<const NodeId> members_of(NodeId i) const noexcept {
    return {members.data() + offsets[i], size(i)};
  }
  std::span<const std::size_t> slots_of(NodeId i) const noexcept {
    return {slots.data() + offsets[i], size(i)};
  }
  SubgraphSample sample(NodeId i) const { return {i, members_of(i), epoch}; }
  double mean_size() const noexcept;
};

/// Independent Bernoulli(p_{j->i}) per CSR slot; the draw for target i uses
/// the stream hash(seed, epoch, i).
SubgraphSet sample_subgraphs(const SamplingProbabilities& probs, const Graph& g, std::uint64_t seed,
                             std::uint64_t epoch);
SubgraphSet singleton_subgraphs(NodeId num_nodes);
/// Every neighbor included.
SubgraphSet full_subgraphs(const Graph& g);

/// 1 per CSR slot (i, j) when j was sampled into i's subgraph.
std::vector<std::uint8_t> membership_bits(const SubgraphSet& subgraphs, const Graph& g);

/// u = lambda p z_j + (1 - lambda p) z_i.
struct MixupDraw {
  double lambda = 0.0;
  NodeId i = 0;
  NodeId j = 0;
  std::vector<double> u;
};
MixupDraw mixup_sample(std::span<const double> z_i, std::span<const double> z_j, double p_ji,
                       double lambda, NodeId i = 0, NodeId j = 0);
MixupDraw mixup_sample(std::span<const double> z_i, std::span<const double> z_j, double p_ji,
                       double alpha, Rng& rng, NodeId i = 0, NodeId j = 0);

/// Beta(alpha, alpha) draw per subgraph member, aligned with `members`;
/// node i uses the stream hash(seed, epoch, i). Self entries are 0.
std::vector<double> draw_mixup_lambdas(const SubgraphSet& subgraphs, double alpha, std::uint64_t seed,
                                       std::uint64_t epoch);

struct KdOptions {
  double tau = 1.0;
  bool tau_squared = false;  // multiply KD terms by tau^2
};

/// Which teacher row the HGMD-weight KL term compares against.
enum class WeightTarget {
  Member,         // KL(softmax(z_j/tau), softmax(h_i/tau)) for member j
  StrictLiteral,  // KL(softmax(z_i/tau), softmax(h_i/tau)) for every member
};

// Every loss returns the mean over all nodes and, when `grad` is non-null,
// writes dL/dH. Probabilities, subgraphs, lambdas and entropies are
// constants of the step.

double loss_glnn(const DenseMatrix& teacher, const DenseMatrix& student, const KdOptions& kd,
                 DenseMatrix* grad);

/// (1 - exp(-H(h_i) / max(H(z_i), guard))) * KL_i with the entropies given.
double loss_weighting(const DenseMatrix& teacher, const DenseMatrix& student,
                      std::span<const double> teacher_entropy, std::span<const double> student_entropy,
                      const KdOptions& kd, DenseMatrix* grad);
/// Entropies taken from `teacher` and `student` themselves (no gradient through them).
double loss_weighting(const DenseMatrix& teacher, const DenseMatrix& student, const KdOptions& kd,
                      DenseMatrix* grad);

double loss_hgmd_weight(const DenseMatrix& teacher, const DenseMatrix& student,
                        const SubgraphSet& subgraphs, const SamplingProbabilities& probs,
                        const KdOptions& kd, WeightTarget target, DenseMatrix* grad);

double loss_hgmd_mixup(const DenseMatrix& teacher, const DenseMatrix& student,
                       const SubgraphSet& subgraphs, const SamplingProbabilities& probs,
                       std::span<const double> lambdas, const KdOptions& kd, DenseMatrix* grad);

/// beta * ce + (1 - beta) * kd.
double total_loss(double ce, double kd, double beta);

enum class Scheme { Glnn, LossWeight, HgmdWeight, HgmdMixup };

/// Accepts underscore or hyphen spellings ("hgmd_mixup", "hgmd-mixup").
Scheme parse_scheme(std::string_view name);
std::string_view scheme_name(Scheme scheme);
bool uses_subgraphs(Scheme scheme);

}  // namespace hgmd

#endif  // HGMD_DISTILL_HPP
