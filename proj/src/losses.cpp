#include <algorithm>
#include <cmath>

#include "hgmd/distill.hpp"
#include "hgmd/error.hpp"
#include "hgmd/tensor.hpp"

namespace hgmd {

namespace {

void check_pair(const DenseMatrix& teacher, const DenseMatrix& student) {
  if (!teacher.same_shape(student)) throw_invalid("kd loss: teacher/student logits shape mismatch");
  if (teacher.rows() == 0) throw_invalid("kd loss: empty logits");
}

double kd_factor(const KdOptions& kd) {
  if (!(kd.tau > 0.0)) throw_invalid("kd loss: tau must be > 0");
  return kd.tau_squared ? kd.tau * kd.tau : 1.0;
}

// Student row cached as softmax and log-softmax at temperature tau.
struct StudentRow {
  std::vector<double> q;
  std::vector<double> logq;

  explicit StudentRow(std::size_t c) : q(c), logq(c) {}
  void set(std::span<const double> h, double tau) {
    log_softmax_temp(h, tau, logq);
    for (std::size_t k = 0; k < q.size(); ++k) q[k] = std::exp(logq[k]);
  }
};

// KL(p || q); adds weight * dKL/dh = weight * (q - p) / tau into grad_row.
double kl_term(std::span<const double> p, const StudentRow& s, double tau, double weight,
               std::span<double> grad_row) {
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    kl += p[k] * (std::log(std::clamp(p[k], kProbFloor, 1.0)) - s.logq[k]);
  }
  if (!grad_row.empty() && weight != 0.0) {
    const double w = weight / tau;
    for (std::size_t k = 0; k < p.size(); ++k) grad_row[k] += w * (s.q[k] - p[k]);
  }
  return kl;
}

DenseMatrix softened_rows(const DenseMatrix& logits, double tau) {
  DenseMatrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) softmax_temp(logits.row(i), tau, p.row(i));
  return p;
}

void init_grad(DenseMatrix* grad, const DenseMatrix& like) {
  if (grad) *grad = DenseMatrix(like.rows(), like.cols());
}

std::span<double> grad_row(DenseMatrix* grad, std::size_t i) {
  return grad ? grad->row(i) : std::span<double>{};
}

void check_subgraphs(const SubgraphSet& subgraphs, const SamplingProbabilities& probs, std::size_t n) {
  if (subgraphs.num_targets() != n) throw_invalid("kd loss: subgraph count != number of nodes");
  for (NodeId i = 0; i < subgraphs.num_targets(); ++i) {
    const auto members = subgraphs.members_of(i);
    if (members.empty() || members.front() != i) throw_invalid("kd loss: subgraph must start with its target");
  }
  for (std::size_t slot : subgraphs.slots) {
    if (slot != kNoEdge && slot >= probs.values.size()) throw_invalid("kd loss: subgraph slot out of range");
  }
}

}  // namespace

double loss_glnn(const DenseMatrix& teacher, const DenseMatrix& student, const KdOptions& kd,
                 DenseMatrix* grad) {
  check_pair(teacher, student);
  const double f = kd_factor(kd);
  const double inv_n = 1.0 / static_cast<double>(teacher.rows());
  init_grad(grad, student);
  std::vector<double> p(teacher.cols());
  StudentRow s(teacher.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < teacher.rows(); ++i) {
    softmax_temp(teacher.row(i), kd.tau, p);
    s.set(student.row(i), kd.tau);
    total += kl_term(p, s, kd.tau, f * inv_n, grad_row(grad, i));
  }
  return f * total * inv_n;
}

double loss_weighting(const DenseMatrix& teacher, const DenseMatrix& student,
                      std::span<const double> teacher_entropy, std::span<const double> student_entropy,
                      const KdOptions& kd, DenseMatrix* grad) {
  check_pair(teacher, student);
  if (teacher_entropy.size() != teacher.rows() || student_entropy.size() != teacher.rows()) {
    throw_invalid("loss_weighting: entropy vector length mismatch");
  }
  const double f = kd_factor(kd);
  const double inv_n = 1.0 / static_cast<double>(teacher.rows());
  init_grad(grad, student);
  std::vector<double> p(teacher.cols());
  StudentRow s(teacher.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < teacher.rows(); ++i) {
    const double w = 1.0 - std::exp(-student_entropy[i] / std::max(teacher_entropy[i], kEntropyGuard));
    softmax_temp(teacher.row(i), kd.tau, p);
    s.set(student.row(i), kd.tau);
    total += w * kl_term(p, s, kd.tau, f * inv_n * w, grad_row(grad, i));
  }
  return f * total * inv_n;
}

double loss_weighting(const DenseMatrix& teacher, const DenseMatrix& student, const KdOptions& kd,
                      DenseMatrix* grad) {
  check_pair(teacher, student);
  const auto scores = hardness_scores(teacher, student, kd.tau);
  return loss_weighting(teacher, student, scores.teacher_entropy, scores.student_entropy, kd, grad);
}

double loss_hgmd_weight(const DenseMatrix& teacher, const DenseMatrix& student,
                        const SubgraphSet& subgraphs, const SamplingProbabilities& probs,
                        const KdOptions& kd, WeightTarget target, DenseMatrix* grad) {
  check_pair(teacher, student);
  check_subgraphs(subgraphs, probs, teacher.rows());
  const double f = kd_factor(kd);
  const double inv_n = 1.0 / static_cast<double>(teacher.rows());
  init_grad(grad, student);
  const DenseMatrix soft = softened_rows(teacher, kd.tau);
  StudentRow s(teacher.cols());
  double total = 0.0;
  for (NodeId i = 0; i < subgraphs.num_targets(); ++i) {
    s.set(student.row(i), kd.tau);
    const auto members = subgraphs.members_of(i);
    const auto slots = subgraphs.slots_of(i);
    const double inv_size = 1.0 / static_cast<double>(members.size());
    double node_sum = 0.0;
    for (std::size_t k = 0; k < members.size(); ++k) {
      const double p = slots[k] == kNoEdge ? SamplingProbabilities::self() : probs.values[slots[k]];
      const NodeId source = target == WeightTarget::Member ? members[k] : i;
      node_sum += p * kl_term(soft.row(source), s, kd.tau, f * inv_n * inv_size * p, grad_row(grad, i));
    }
    total += node_sum * inv_size;
  }
  return f * total * inv_n;
}

double loss_hgmd_mixup(const DenseMatrix& teacher, const DenseMatrix& student,
                       const SubgraphSet& subgraphs, const SamplingProbabilities& probs,
                       std::span<const double> lambdas, const KdOptions& kd, DenseMatrix* grad) {
  check_pair(teacher, student);
  check_subgraphs(subgraphs, probs, teacher.rows());
  if (lambdas.size() != subgraphs.members.size()) throw_invalid("loss_hgmd_mixup: one lambda per member required");
  const double f = kd_factor(kd);
  const double inv_n = 1.0 / static_cast<double>(teacher.rows());
  init_grad(grad, student);
  const std::size_t c = teacher.cols();
  std::vector<double> target(c);
  std::vector<double> mixed(c);
  StudentRow s(c);
  double total = 0.0;
  for (NodeId i = 0; i < subgraphs.num_targets(); ++i) {
    s.set(student.row(i), kd.tau);
    const auto zi = teacher.row(i);
    const std::size_t begin = subgraphs.offsets[i];
    const std::size_t size = subgraphs.size(i);
    const double inv_size = 1.0 / static_cast<double>(size);
    double node_sum = 0.0;
    for (std::size_t k = begin; k < begin + size; ++k) {
      const std::size_t slot = subgraphs.slots[k];
      if (slot == kNoEdge) {
        softmax_temp(zi, kd.tau, target);  // u_{i,i} = z_i
      } else {
        const double coeff = lambdas[k] * probs.values[slot];
        const auto zj = teacher.row(subgraphs.members[k]);
        for (std::size_t m = 0; m < c; ++m) mixed[m] = coeff * zj[m] + (1.0 - coeff) * zi[m];
        softmax_temp(mixed, kd.tau, target);
      }
      node_sum += kl_term(target, s, kd.tau, f * inv_n * inv_size, grad_row(grad, i));
    }
    total += node_sum * inv_size;
  }
  return f * total * inv_n;
}

double total_loss(double ce, double kd, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw_invalid("total_loss: beta must be in [0, 1]");
  return beta * ce + (1.0 - beta) * kd;
}

}  // namespace hgmd
