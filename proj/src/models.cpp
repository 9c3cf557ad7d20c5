#include "hgmd/models.hpp"

#include <cmath>

#include "hgmd/error.hpp"
#include "hgmd/rng.hpp"
#include "hgmd/tensor.hpp"

namespace hgmd {

LayerStack::LayerStack(std::size_t in_dim, std::size_t out_dim, const LayerStackConfig& config,
                       std::uint64_t init_seed, const std::string& name_prefix)
    : dropout_(config.dropout) {
  if (config.layers < 1) throw_invalid("a model needs at least one layer");
  if (config.layers > 1 && config.hidden < 1) throw_invalid("hidden width must be >= 1");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw_invalid("dropout must be in [0, 1)");
  if (in_dim == 0 || out_dim == 0) throw_invalid("model dimensions must be positive");

  for (std::uint32_t l = 0; l < config.layers; ++l) {
    const std::size_t fan_in = l == 0 ? in_dim : config.hidden;
    const std::size_t fan_out = l + 1 == config.layers ? out_dim : config.hidden;
    // Glorot uniform.
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Rng rng = make_stream(init_seed, StreamSalt::Init, l);
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseMatrix w(fan_in, fan_out);
    for (double& v : w.values()) v = dist(rng);
    weights_.emplace_back(name_prefix + ".W" + std::to_string(l), std::move(w));
    biases_.emplace_back(name_prefix + ".b" + std::to_string(l), DenseMatrix(1, fan_out));
  }
}

LayerStack::LayerStack(std::vector<DenseMatrix> weights, std::vector<DenseMatrix> biases,
                       double dropout, const std::string& name_prefix)
    : dropout_(dropout) {
  if (weights.empty() || weights.size() != biases.size()) throw_invalid("layer stack: bad layer count");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw_invalid("dropout must be in [0, 1)");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (l > 0 && weights[l].rows() != weights[l - 1].cols()) throw_invalid("layer stack: chained shapes disagree");
    if (biases[l].rows() != 1 || biases[l].cols() != weights[l].cols()) throw_invalid("layer stack: bias shape");
    weights_.emplace_back(name_prefix + ".W" + std::to_string(l), std::move(weights[l]));
    biases_.emplace_back(name_prefix + ".b" + std::to_string(l), std::move(biases[l]));
  }
}

DenseMatrix LayerStack::forward(const NormalizedAdjacency* adj, const DenseMatrix& x,
                                const std::optional<DropoutKey>& dropout, ForwardCache* cache) const {
  if (x.cols() != in_dim()) {
    throw_invalid("forward: input has " + std::to_string(x.cols()) + " features, model expects " +
                  std::to_string(in_dim()));
  }
  if (adj && adj->num_nodes() != x.rows()) throw_invalid("forward: adjacency/feature row mismatch");
  if (cache) *cache = ForwardCache{};

  const bool use_dropout = dropout.has_value() && dropout_ > 0.0;
  const double keep_scale = 1.0 / (1.0 - dropout_);

  DenseMatrix h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    DenseMatrix t = matmul(h, weights_[l].value);
    DenseMatrix p = adj ? spmm(*adj, t) : std::move(t);
    const auto b = biases_[l].value.row(0);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      auto row = p.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
    }
    if (cache) cache->inputs.push_back(std::move(h));

    if (l + 1 == weights_.size()) return p;

    DenseMatrix a = p;
    for (double& v : a.values()) v = v > 0.0 ? v : 0.0;
    if (use_dropout) {
      Rng rng = make_stream(dropout->seed, StreamSalt::Dropout, dropout->epoch, l);
      DenseMatrix mask(a.rows(), a.cols());
      for (double& m : mask.values()) m = uniform01(rng) < dropout_ ? 0.0 : keep_scale;
      for (std::size_t i = 0; i < a.size(); ++i) a.values()[i] *= mask.values()[i];
      if (cache) cache->masks.push_back(std::move(mask));
    }
    if (cache) cache->pre.push_back(std::move(p));
    h = std::move(a);
  }
  return h;  // unreachable: the loop returns on its last layer
}

void LayerStack::backward(const NormalizedAdjacency* adj, const ForwardCache& cache,
                          const DenseMatrix& grad_logits) {
  if (cache.inputs.size() != weights_.size()) throw_invalid("backward: cache from a different model");
  DenseMatrix g = grad_logits;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    if (l + 1 < weights_.size()) {
      const auto pre = cache.pre[l].values();
      auto gv = g.values();
      for (std::size_t i = 0; i < gv.size(); ++i) {
        if (pre[i] <= 0.0) gv[i] = 0.0;
      }
      if (!cache.masks.empty()) {
        const auto mask = cache.masks[l].values();
        for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= mask[i];
      }
    }
    auto db = biases_[l].grad.row(0);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const auto row = g.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
    }
    // adj is symmetric, so adj^T * g == adj * g.
    DenseMatrix dt = adj ? spmm(*adj, g) : std::move(g);
    const DenseMatrix dw = matmul_tn(cache.inputs[l], dt);
    auto wg = weights_[l].grad.values();
    for (std::size_t i = 0; i < wg.size(); ++i) wg[i] += dw.values()[i];
    if (l > 0) g = matmul_nt(dt, weights_[l].value);
  }
}

std::vector<Parameter*> LayerStack::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::size_t LayerStack::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].value.size() + biases_[l].value.size();
  return n;
}

void LayerStack::zero_grad() {
  for (auto& p : weights_) p.zero_grad();
  for (auto& p : biases_) p.zero_grad();
}

double masked_cross_entropy(const DenseMatrix& logits, const Labels& labels,
                            std::span<const NodeId> nodes, DenseMatrix* grad) {
  if (labels.y.size() != logits.rows()) throw_invalid("cross entropy: label count mismatch");
  if (grad) *grad = DenseMatrix(logits.rows(), logits.cols());
  if (nodes.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(nodes.size());
  std::vector<double> logp(logits.cols());
  double loss = 0.0;
  for (NodeId i : nodes) {
    const ClassId y = labels.y.at(i);
    if (y >= logits.cols()) throw_invalid("cross entropy: label out of range");
    log_softmax_temp(logits.row(i), 1.0, logp);
    loss += -logp[y];
    if (grad) {
      auto g = grad->row(i);
      for (std::size_t c = 0; c < logp.size(); ++c) g[c] = inv * std::exp(logp[c]);
      g[y] -= inv;
    }
  }
  return loss * inv;
}

double accuracy(const DenseMatrix& logits, const Labels& labels, std::span<const NodeId> nodes) {
  if (labels.y.size() != logits.rows()) throw_invalid("accuracy: label count mismatch");
  if (nodes.empty()) return 0.0;
  std::size_t correct = 0;
  for (NodeId i : nodes) correct += argmax(logits.row(i)) == labels.y.at(i) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

SplitAccuracy evaluate_splits(const DenseMatrix& logits, const Dataset& ds) {
  return {accuracy(logits, ds.labels, ds.splits.train), accuracy(logits, ds.labels, ds.splits.val),
          accuracy(logits, ds.labels, ds.splits.test)};
}

TeacherResult train_teacher(const Dataset& ds, const NormalizedAdjacency& adj,
                            const TrainConfig& config, std::uint64_t seed) {
  validate_dataset(ds);
  if (adj.num_nodes() != ds.num_nodes()) throw_invalid("train_teacher: adjacency does not match dataset");
  if (config.epochs < 1) throw_config("teacher epochs must be >= 1");

  GcnModel model(ds.feature_dim(), ds.num_classes(), config.arch, seed);
  Adam adam(config.optim);
  const auto params = model.stack().parameters();

  TeacherResult result;
  result.checkpoint.val_acc = -1.0;
  ForwardCache cache;
  DenseMatrix grad;
  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    model.stack().zero_grad();
    const DenseMatrix logits = model.forward(adj, ds.features, DropoutKey{seed, epoch}, &cache);
    const double loss = masked_cross_entropy(logits, ds.labels, ds.splits.train, &grad);
    if (!std::isfinite(loss)) throw_numeric("teacher loss is not finite at epoch " + std::to_string(epoch));
    result.train_loss.push_back(loss);
    model.backward(adj, cache, grad);
    adam.step(params);

    DenseMatrix eval_logits = model.forward(adj, ds.features);
    if (!eval_logits.all_finite()) throw_numeric("teacher logits diverged at epoch " + std::to_string(epoch));
    const double val = accuracy(eval_logits, ds.labels, ds.splits.val);
    if (val > result.checkpoint.val_acc) {
      result.checkpoint.val_acc = val;
      result.checkpoint.logits = std::move(eval_logits);
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  result.accuracy = evaluate_splits(result.checkpoint.logits, ds);
  return result;
}

}  // namespace hgmd
