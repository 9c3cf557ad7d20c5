#include "hgmd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hgmd/error.hpp"

namespace hgmd {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw_invalid("matrix data length " + std::to_string(data_.size()) + " != " +
                  std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

void DenseMatrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

void require(bool ok, const char* op, const DenseMatrix& a, const DenseMatrix& b) {
  if (!ok) {
    throw_invalid(std::string(op) + ": dimension mismatch " + std::to_string(a.rows()) + "x" +
                  std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                  std::to_string(b.cols()));
  }
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw_invalid("temperature must be > 0");
}

}  // namespace

namespace {

// y += alpha * x over n elements; restrict lets the loop vectorize.
inline void axpy(double alpha, const double* __restrict x, double* __restrict y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] += alpha * x[j];
}

// out(i, :) = sum_k a(i, k) * b(k, :), skipping zero a(i, k).
void gemm_rows(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* dst = out.row(i).data();
    const auto src = a.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      if (src[k] != 0.0) axpy(src[k], b.row(k).data(), dst, m);
    }
  }
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "matmul", a, b);
  DenseMatrix out(a.rows(), b.cols());
  gemm_rows(a, b, out);
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows(), "matmul_tn", a, b);
  DenseMatrix out(a.cols(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto ar = a.row(r);
    const double* br = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      if (ar[i] != 0.0) axpy(ar[i], br, out.row(i).data(), m);
    }
  }
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.cols(), "matmul_nt", a, b);
  DenseMatrix bt(b.cols(), b.rows());
  for (std::size_t r = 0; r < b.rows(); ++r) {
    const auto br = b.row(r);
    for (std::size_t c = 0; c < b.cols(); ++c) bt(c, r) = br[c];
  }
  DenseMatrix out(a.rows(), b.rows());
  gemm_rows(a, bt, out);
  return out;
}

DenseMatrix spmm(const NormalizedAdjacency& adj, const DenseMatrix& x) {
  if (adj.num_nodes() != x.rows()) {
    throw_invalid("spmm: adjacency has " + std::to_string(adj.num_nodes()) + " nodes, matrix has " +
                  std::to_string(x.rows()) + " rows");
  }
  DenseMatrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = adj.offsets[i]; k < adj.offsets[i + 1]; ++k) {
      const double w = adj.weights[k];
      const auto src = x.row(adj.cols[k]);
      for (std::size_t j = 0; j < x.cols(); ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

void softmax_temp(std::span<const double> z, double tau, std::span<double> out) {
  check_tau(tau);
  if (z.empty() || out.size() != z.size()) throw_invalid("softmax_temp: bad row length");
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    out[j] = std::exp((z[j] - zmax) / tau);
    sum += out[j];
  }
  for (double& v : out) v /= sum;
}

std::vector<double> softmax_temp(std::span<const double> z, double tau) {
  std::vector<double> out(z.size());
  softmax_temp(z, tau, out);
  return out;
}

void log_softmax_temp(std::span<const double> z, double tau, std::span<double> out) {
  check_tau(tau);
  if (z.empty() || out.size() != z.size()) throw_invalid("log_softmax_temp: bad row length");
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp((v - zmax) / tau);
  const double lse = std::log(sum);
  for (std::size_t j = 0; j < z.size(); ++j) out[j] = (z[j] - zmax) / tau - lse;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw_invalid("kl_divergence: length mismatch");
  const auto check = [](std::span<const double> d, const char* name) {
    double s = 0.0;
    for (double v : d) {
      if (!std::isfinite(v) || v < 0.0) throw_invalid(std::string("kl_divergence: ") + name + " is not a distribution");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw_invalid(std::string("kl_divergence: ") + name + " does not sum to 1");
  };
  check(p, "p");
  check(q, "q");
  double kl = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] == 0.0) continue;
    const double pj = std::clamp(p[j], kProbFloor, 1.0);
    const double qj = std::clamp(q[j], kProbFloor, 1.0);
    kl += p[j] * (std::log(pj) - std::log(qj));
  }
  return kl;
}

double cross_entropy(std::span<const double> logits, ClassId label) {
  if (label >= logits.size()) {
    throw_invalid("cross_entropy: label " + std::to_string(label) + " out of range for " +
                  std::to_string(logits.size()) + " classes");
  }
  std::vector<double> logp(logits.size());
  log_softmax_temp(logits, 1.0, logp);
  return -logp[label];
}

ClassId argmax(std::span<const double> row) {
  return static_cast<ClassId>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace hgmd
