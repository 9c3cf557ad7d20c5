#ifndef HGMD_STUDENT_HPP
#define HGMD_STUDENT_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "hgmd/distill.hpp"
#include "hgmd/hardness.hpp"
#include "hgmd/models.hpp"

namespace hgmd {

struct DistillConfig {
  Scheme scheme = Scheme::HgmdMixup;
  double tau = 1.0;
  double beta = 0.1;
  double alpha = 0.4;
  EtaSchedule eta;
  std::uint32_t epochs = 500;
  bool kd_tau_squared = false;
  /// HGMD-weight compares every member against z_i instead of z_j.
  bool strict_literal_weight = false;
  /// Epoch whose per-edge probabilities are kept for the 3D histogram;
  /// negative counts from the end (-1 = last epoch).
  std::int64_t snapshot_epoch = -1;
  /// Trailing epochs whose sampled memberships are kept for the asymmetry report.
  std::uint32_t asymmetry_window = 10;

  void validate() const;
};

struct StudentConfig {
  LayerStackConfig arch;
  AdamConfig optim;
  DistillConfig distill;
};

/// One training epoch. total == beta * ce + (1 - beta) * kd.
struct LossReport {
  std::uint32_t epoch = 0;
  double ce = 0.0;
  double kd = 0.0;
  double total = 0.0;
  double mean_subgraph_size = 1.0;
  double mean_student_entropy = 0.0;
  double eta = 0.0;
};

/// Per-edge state at one epoch, aligned to the graph's CSR slots.
struct EdgeSnapshot {
  std::uint32_t epoch = 0;
  std::vector<double> probability;
  std::vector<double> similarity;
  std::vector<double> teacher_entropy;  // per node
  std::vector<double> student_entropy;  // per node
};

struct MembershipRecord {
  std::uint32_t epoch = 0;
  std::vector<std::uint8_t> bits;  // per CSR slot
};

struct StudentResult {
  MlpModel model;      // weights of the selected epoch
  DenseMatrix logits;  // eval-mode logits of the selected epoch
  SplitAccuracy accuracy;
  std::uint32_t best_epoch = 0;
  std::vector<LossReport> log;
  std::vector<MembershipRecord> memberships;  // last `asymmetry_window` epochs
  std::optional<EdgeSnapshot> snapshot;
};

/// Distills frozen teacher logits into an MLP. Each epoch: eval-mode student
/// logits -> entropies and eta(t) -> sampling probabilities -> Bernoulli
/// subgraphs -> scheme loss + CE -> one Adam step on the student only.
/// Keeps the epoch with the best validation accuracy (earliest on ties).
StudentResult train_student(const Dataset& ds, const DenseMatrix& teacher_logits,
                            const StudentConfig& config, std::uint64_t seed);

}  // namespace hgmd

#endif  // HGMD_STUDENT_HPP
