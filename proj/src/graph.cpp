#include "hgmd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hgmd/error.hpp"
#include "hgmd/rng.hpp"

namespace hgmd {

Graph Graph::from_edges(NodeId num_nodes, std::span<const std::pair<NodeId, NodeId>> edges,
                        std::size_t* duplicates, std::size_t* self_loops) {
  std::vector<std::pair<NodeId, NodeId>> directed;
  directed.reserve(2 * edges.size());
  std::size_t loops = 0;
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw_invalid("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                    ") out of range for " + std::to_string(num_nodes) + " nodes");
    }
    if (u == v) {
      ++loops;
      continue;
    }
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  std::sort(directed.begin(), directed.end());
  const auto unique_end = std::unique(directed.begin(), directed.end());
  const std::size_t removed = static_cast<std::size_t>(directed.end() - unique_end);
  directed.erase(unique_end, directed.end());

  if (duplicates) *duplicates = removed / 2;
  if (self_loops) *self_loops = loops;

  Graph g;
  g.offsets_.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
  g.targets_.reserve(directed.size());
  for (const auto& [u, v] : directed) {
    ++g.offsets_[u + 1];
    g.targets_.push_back(v);
  }
  std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
  return g;
}

Graph Graph::from_csr(std::vector<std::size_t> offsets, std::vector<NodeId> targets) {
  if (offsets.empty() || offsets.front() != 0) throw_invalid("csr offsets must start at 0");
  if (offsets.back() != targets.size()) throw_invalid("csr offsets[N] != len(targets)");
  const auto n = offsets.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (offsets[i] > offsets[i + 1]) throw_invalid("csr offsets must be nondecreasing");
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
      if (targets[k] >= n) throw_invalid("csr target out of range");
      if (targets[k] == i) throw_invalid("csr graph must not store self-loops");
      if (k > offsets[i] && targets[k] <= targets[k - 1]) {
        throw_invalid("csr rows must be sorted without duplicates");
      }
    }
  }
  Graph g;
  g.offsets_ = std::move(offsets);
  g.targets_ = std::move(targets);
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    for (NodeId j : g.neighbors(i)) {
      if (g.edge_slot(j, i) == kNoEdge) throw_invalid("csr graph is not symmetric");
    }
  }
  return g;
}

std::size_t Graph::edge_slot(NodeId i, NodeId j) const noexcept {
  const auto row = neighbors(i);
  const auto it = std::lower_bound(row.begin(), row.end(), j);
  if (it == row.end() || *it != j) return kNoEdge;
  return offsets_[i] + static_cast<std::size_t>(it - row.begin());
}

std::vector<std::size_t> Graph::reverse_slots() const {
  std::vector<std::size_t> rev(targets_.size(), kNoEdge);
  for (NodeId i = 0; i < num_nodes(); ++i) {
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      rev[k] = edge_slot(targets_[k], i);
    }
  }
  return rev;
}

NormalizedAdjacency normalize_adjacency(const Graph& g) {
  const NodeId n = g.num_nodes();
  NormalizedAdjacency adj;
  adj.offsets.assign(static_cast<std::size_t>(n) + 1, 0);
  adj.cols.reserve(g.num_directed_edges() + n);
  adj.weights.reserve(g.num_directed_edges() + n);

  // (deg_i + 1)(deg_j + 1) is formed in integers, so w(i,j) == w(j,i) bitwise.
  const auto weight = [&](NodeId i, NodeId j) {
    const double prod = static_cast<double>((g.degree(i) + 1) * (g.degree(j) + 1));
    return 1.0 / std::sqrt(prod);
  };

  for (NodeId i = 0; i < n; ++i) {
    bool self_done = false;
    for (NodeId j : g.neighbors(i)) {
      if (!self_done && j > i) {
        adj.cols.push_back(i);
        adj.weights.push_back(weight(i, i));
        self_done = true;
      }
      adj.cols.push_back(j);
      adj.weights.push_back(weight(i, j));
    }
    if (!self_done) {
      adj.cols.push_back(i);
      adj.weights.push_back(weight(i, i));
    }
    adj.offsets[i + 1] = adj.cols.size();
  }
  return adj;
}

Dataset gen_synthetic_sbm(const SbmParams& params) {
  if (params.blocks < 2) throw_invalid("sbm needs at least 2 blocks");
  if (params.nodes_per_block < 1) throw_invalid("sbm needs at least 1 node per block");
  if (params.feature_dim < params.blocks) throw_invalid("sbm feature_dim must be >= blocks");
  if (!(params.p_out >= 0.0 && params.p_out < params.p_in && params.p_in <= 1.0)) {
    throw_invalid("sbm requires 0 <= p_out < p_in <= 1");
  }
  if (!(params.noise_std >= 0.0) || !std::isfinite(params.noise_std)) {
    throw_invalid("sbm noise_std must be finite and >= 0");
  }

  const NodeId n = params.blocks * params.nodes_per_block;
  const auto block_of = [&](NodeId v) { return v / params.nodes_per_block; };

  std::vector<std::pair<NodeId, NodeId>> edges;
  {
    Rng rng = make_stream(params.seed, StreamSalt::SbmEdges);
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId v = u + 1; v < n; ++v) {
        const double p = block_of(u) == block_of(v) ? params.p_in : params.p_out;
        if (uniform01(rng) < p) edges.emplace_back(u, v);
      }
    }
  }

  Dataset ds;
  ds.name = "sbm-b" + std::to_string(params.blocks) + "-n" + std::to_string(n) + "-s" +
            std::to_string(params.seed);
  ds.graph = Graph::from_edges(n, edges);

  ds.features = DenseMatrix(n, params.feature_dim);
  {
    Rng rng = make_stream(params.seed, StreamSalt::SbmFeatures);
    std::normal_distribution<double> noise(0.0, params.noise_std);
    for (NodeId v = 0; v < n; ++v) {
      for (std::size_t c = 0; c < params.feature_dim; ++c) {
        const double base = c == block_of(v) ? 1.0 : 0.0;
        // Rounded through f32 so the in-memory copy equals a reload from disk.
        ds.features(v, c) = static_cast<double>(static_cast<float>(base + noise(rng)));
      }
    }
  }

  ds.labels.num_classes = params.blocks;
  ds.labels.y.resize(n);
  for (NodeId v = 0; v < n; ++v) ds.labels.y[v] = block_of(v);

  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  {
    Rng rng = make_stream(params.seed, StreamSalt::Split);
    std::shuffle(perm.begin(), perm.end(), rng);
  }
  const auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * n)));
  const auto n_val = static_cast<std::size_t>(std::lround(0.1 * n));
  if (n_train + n_val > n) throw_invalid("sbm too small for a 10/10/80 split");
  ds.splits.train.assign(perm.begin(), perm.begin() + n_train);
  ds.splits.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  ds.splits.test.assign(perm.begin() + n_train + n_val, perm.end());
  std::sort(ds.splits.train.begin(), ds.splits.train.end());
  std::sort(ds.splits.val.begin(), ds.splits.val.end());
  std::sort(ds.splits.test.begin(), ds.splits.test.end());
  return ds;
}

void row_normalize(DenseMatrix& features) {
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto row = features.row(r);
    double norm = 0.0;
    for (double v : row) norm += std::abs(v);
    if (norm == 0.0) continue;
    for (double& v : row) v /= norm;
  }
}

}  // namespace hgmd
