#ifndef HGMD_TENSOR_HPP
#define HGMD_TENSOR_HPP

#include <span>
#include <vector>

#include "hgmd/graph.hpp"
#include "hgmd/matrix.hpp"

namespace hgmd {

/// Probabilities are clamped to [kProbFloor, 1] before any log.
inline constexpr double kProbFloor = 1e-12;

// Products. Zero entries of the left operand are skipped, which makes
// bag-of-words feature matrices cheap without a separate sparse type.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);     // a * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);  // a^T * b
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);  // a * b^T

/// adj * x in O(nnz(adj) * cols).
DenseMatrix spmm(const NormalizedAdjacency& adj, const DenseMatrix& x);

/// softmax(z / tau), max-subtracted.
std::vector<double> softmax_temp(std::span<const double> z, double tau);
void softmax_temp(std::span<const double> z, double tau, std::span<double> out);
/// log softmax(z / tau).
void log_softmax_temp(std::span<const double> z, double tau, std::span<double> out);

/// sum_j p_j log(p_j / q_j) over distributions, with the probability floor.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// -log softmax(logits)[label].
double cross_entropy(std::span<const double> logits, ClassId label);

/// First index of the maximum (lowest class wins ties).
ClassId argmax(std::span<const double> row);

}  // namespace hgmd

#endif  // HGMD_TENSOR_HPP
