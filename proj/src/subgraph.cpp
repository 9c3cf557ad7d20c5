#include <string>

#include "hgmd/distill.hpp"
#include "hgmd/error.hpp"

namespace hgmd {

double SubgraphSet::mean_size() const noexcept {
  const NodeId n = num_targets();
  return n == 0 ? 0.0 : static_cast<double>(members.size()) / static_cast<double>(n);
}

SubgraphSet sample_subgraphs(const SamplingProbabilities& probs, const Graph& g, std::uint64_t seed,
                             std::uint64_t epoch) {
  if (probs.values.size() != g.num_directed_edges()) throw_invalid("sample_subgraphs: probabilities/graph mismatch");
  SubgraphSet out;
  out.epoch = epoch;
  out.offsets.reserve(static_cast<std::size_t>(g.num_nodes()) + 1);
  const auto offsets = g.offsets();
  const auto targets = g.targets();
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    out.members.push_back(i);
    out.slots.push_back(kNoEdge);
    Rng rng = make_stream(seed, StreamSalt::Subgraph, epoch, i);
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
      if (uniform01(rng) < probs.values[k]) {
        out.members.push_back(targets[k]);
        out.slots.push_back(k);
      }
    }
    out.offsets.push_back(out.members.size());
  }
  return out;
}

SubgraphSet singleton_subgraphs(NodeId num_nodes) {
  SubgraphSet out;
  for (NodeId i = 0; i < num_nodes; ++i) {
    out.members.push_back(i);
    out.slots.push_back(kNoEdge);
    out.offsets.push_back(out.members.size());
  }
  return out;
}

SubgraphSet full_subgraphs(const Graph& g) {
  SubgraphSet out;
  const auto offsets = g.offsets();
  const auto targets = g.targets();
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    out.members.push_back(i);
    out.slots.push_back(kNoEdge);
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
      out.members.push_back(targets[k]);
      out.slots.push_back(k);
    }
    out.offsets.push_back(out.members.size());
  }
  return out;
}

std::vector<std::uint8_t> membership_bits(const SubgraphSet& subgraphs, const Graph& g) {
  if (subgraphs.num_targets() != g.num_nodes()) throw_invalid("membership_bits: subgraphs/graph mismatch");
  std::vector<std::uint8_t> bits(g.num_directed_edges(), 0);
  for (std::size_t slot : subgraphs.slots) {
    if (slot != kNoEdge) bits.at(slot) = 1;
  }
  return bits;
}

MixupDraw mixup_sample(std::span<const double> z_i, std::span<const double> z_j, double p_ji,
                       double lambda, NodeId i, NodeId j) {
  if (z_i.size() != z_j.size()) throw_invalid("mixup: logit length mismatch");
  if (!(p_ji >= 0.0 && p_ji <= 1.0)) throw_invalid("mixup: p must be in [0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw_invalid("mixup: lambda must be in [0, 1]");
  MixupDraw draw{lambda, i, j, std::vector<double>(z_i.size())};
  const double c = lambda * p_ji;
  for (std::size_t k = 0; k < z_i.size(); ++k) draw.u[k] = c * z_j[k] + (1.0 - c) * z_i[k];
  return draw;
}

MixupDraw mixup_sample(std::span<const double> z_i, std::span<const double> z_j, double p_ji,
                       double alpha, Rng& rng, NodeId i, NodeId j) {
  if (!(alpha > 0.0)) throw_invalid("mixup: alpha must be > 0");
  return mixup_sample(z_i, z_j, p_ji, sample_symmetric_beta(rng, alpha), i, j);
}

std::vector<double> draw_mixup_lambdas(const SubgraphSet& subgraphs, double alpha, std::uint64_t seed,
                                       std::uint64_t epoch) {
  if (!(alpha > 0.0)) throw_invalid("mixup: alpha must be > 0");
  std::vector<double> lambdas(subgraphs.members.size(), 0.0);
  for (NodeId i = 0; i < subgraphs.num_targets(); ++i) {
    Rng rng = make_stream(seed, StreamSalt::Mixup, epoch, i);
    for (std::size_t k = subgraphs.offsets[i]; k < subgraphs.offsets[i + 1]; ++k) {
      if (subgraphs.slots[k] == kNoEdge) continue;
      lambdas[k] = sample_symmetric_beta(rng, alpha);
    }
  }
  return lambdas;
}

Scheme parse_scheme(std::string_view name) {
  std::string s(name);
  for (char& c : s) {
    if (c == '-') c = '_';
  }
  if (s == "glnn") return Scheme::Glnn;
  if (s == "loss_weight" || s == "loss_weighting") return Scheme::LossWeight;
  if (s == "hgmd_weight") return Scheme::HgmdWeight;
  if (s == "hgmd_mixup") return Scheme::HgmdMixup;
  throw_config("unknown scheme '" + std::string(name) + "' (expected glnn, loss_weight, hgmd_weight, hgmd_mixup)");
}

std::string_view scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::Glnn: return "glnn";
    case Scheme::LossWeight: return "loss_weight";
    case Scheme::HgmdWeight: return "hgmd_weight";
    case Scheme::HgmdMixup: return "hgmd_mixup";
  }
  return "unknown";
}

bool uses_subgraphs(Scheme scheme) { return scheme == Scheme::HgmdWeight || scheme == Scheme::HgmdMixup; }

}  // namespace hgmd
