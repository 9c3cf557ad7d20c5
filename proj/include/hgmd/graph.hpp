#ifndef HGMD_GRAPH_HPP
#define HGMD_GRAPH_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hgmd/matrix.hpp"

namespace hgmd {

using NodeId = std::uint32_t;
using ClassId = std::uint32_t;

inline constexpr std::size_t kNoEdge = static_cast<std::size_t>(-1);

/// Undirected graph stored as a symmetric CSR without self-loops. Each
/// row is sorted ascending and free of duplicates.
class Graph {
 public:
  Graph() = default;

  /// Builds from an undirected edge list. Both directions are stored,
  /// duplicates (in either orientation) collapse, self-loops are dropped.
  static Graph from_edges(NodeId num_nodes, std::span<const std::pair<NodeId, NodeId>> edges,
                          std::size_t* duplicates = nullptr, std::size_t* self_loops = nullptr);

  /// Adopts prebuilt CSR arrays after checking every invariant.
  static Graph from_csr(std::vector<std::size_t> offsets, std::vector<NodeId> targets);

  NodeId num_nodes() const noexcept { return static_cast<NodeId>(offsets_.empty() ? 0 : offsets_.size() - 1); }
  std::size_t num_directed_edges() const noexcept { return targets_.size(); }
  std::size_t num_undirected_edges() const noexcept { return targets_.size() / 2; }

  std::span<const std::size_t> offsets() const noexcept { return offsets_; }
  std::span<const NodeId> targets() const noexcept { return targets_; }

  std::span<const NodeId> neighbors(NodeId i) const noexcept {
    return {targets_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::size_t degree(NodeId i) const noexcept { return offsets_[i + 1] - offsets_[i]; }

  /// CSR slot of entry (i, j), or kNoEdge.
  std::size_t edge_slot(NodeId i, NodeId j) const noexcept;

  /// For every CSR slot (i, j), the slot of (j, i).
  std::vector<std::size_t> reverse_slots() const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> targets_;
};

struct Labels {
  std::vector<ClassId> y;
  ClassId num_classes = 0;

  friend bool operator==(const Labels&, const Labels&) = default;
};

struct SplitMasks {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;

  friend bool operator==(const SplitMasks&, const SplitMasks&) = default;
};

struct Dataset {
  std::string name;
  Graph graph;
  DenseMatrix features;  // N x d, promoted from on-disk f32
  Labels labels;
  SplitMasks splits;
  std::size_t duplicate_edges = 0;  // collapsed while loading

  NodeId num_nodes() const noexcept { return graph.num_nodes(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }
  ClassId num_classes() const noexcept { return labels.num_classes; }
};

/// D^-1/2 (A + I) D^-1/2 in CSR form, self-loops included, rows sorted.
struct NormalizedAdjacency {
  std::vector<std::size_t> offsets;
  std::vector<NodeId> cols;
  std::vector<double> weights;

  NodeId num_nodes() const noexcept { return static_cast<NodeId>(offsets.empty() ? 0 : offsets.size() - 1); }
};

NormalizedAdjacency normalize_adjacency(const Graph& g);

/// Throws Config errors naming the offending file and line.
Dataset load_dataset(const std::filesystem::path& dir);
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Checks every cross-field invariant of an in-memory dataset.
void validate_dataset(const Dataset& ds);

struct SbmParams {
  std::uint32_t blocks = 2;
  std::uint32_t nodes_per_block = 10;
  double p_in = 0.5;
  double p_out = 0.05;
  std::uint32_t feature_dim = 8;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

/// Stochastic block model: labels are block ids, features one-hot block id
/// plus Gaussian noise (f32-representable), 10/10/80 random split.
Dataset gen_synthetic_sbm(const SbmParams& params);

/// Scales every feature row to unit L1 norm (rows of zeros are left alone).
void row_normalize(DenseMatrix& features);

}  // namespace hgmd

#endif  // HGMD_GRAPH_HPP
