#ifndef HGMD_MODELS_HPP
#define HGMD_MODELS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgmd/graph.hpp"
#include "hgmd/matrix.hpp"
#include "hgmd/optim.hpp"

namespace hgmd {

struct LayerStackConfig {
  std::uint32_t layers = 2;
  std::uint32_t hidden = 256;
  double dropout = 0.5;  // on hidden activations, training only
};

/// Identifies the dropout masks for one forward pass.
struct DropoutKey {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
};

/// Activations kept by a forward pass for the backward pass.
struct ForwardCache {
  std::vector<DenseMatrix> inputs;  // input to each layer
  std::vector<DenseMatrix> pre;     // pre-activation of each hidden layer
  std::vector<DenseMatrix> masks;   // dropout scale (0 or 1/(1-p)) per hidden layer; empty in eval
};

/// Stack of affine layers with ReLU + dropout between them. With an
/// adjacency each layer is adj * (H W) + b (GCN), without it H W + b (MLP).
class LayerStack {
 public:
  LayerStack() = default;
  LayerStack(std::size_t in_dim, std::size_t out_dim, const LayerStackConfig& config,
             std::uint64_t init_seed, const std::string& name_prefix);
  /// Rebuilds from stored weights (shapes are validated).
  LayerStack(std::vector<DenseMatrix> weights, std::vector<DenseMatrix> biases, double dropout,
             const std::string& name_prefix);

  DenseMatrix forward(const NormalizedAdjacency* adj, const DenseMatrix& x,
                      const std::optional<DropoutKey>& dropout, ForwardCache* cache) const;
  /// Accumulates parameter gradients for dL/dlogits.
  void backward(const NormalizedAdjacency* adj, const ForwardCache& cache,
                const DenseMatrix& grad_logits);

  std::size_t num_layers() const noexcept { return weights_.size(); }
  std::size_t in_dim() const noexcept { return weights_.empty() ? 0 : weights_.front().value.rows(); }
  std::size_t out_dim() const noexcept { return weights_.empty() ? 0 : weights_.back().value.cols(); }
  double dropout() const noexcept { return dropout_; }

  Parameter& weight(std::size_t l) { return weights_.at(l); }
  const Parameter& weight(std::size_t l) const { return weights_.at(l); }
  Parameter& bias(std::size_t l) { return biases_.at(l); }
  const Parameter& bias(std::size_t l) const { return biases_.at(l); }

  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
  double dropout_ = 0.0;
};

/// Teacher: Z = f_theta(A, X).
class GcnModel {
 public:
  GcnModel() = default;
  GcnModel(std::size_t in_dim, std::size_t num_classes, const LayerStackConfig& config,
           std::uint64_t init_seed)
      : stack_(in_dim, num_classes, config, init_seed, "gcn") {}
  explicit GcnModel(LayerStack stack) : stack_(std::move(stack)) {}

  /// Dropout only when `dropout` is set (train mode).
  DenseMatrix forward(const NormalizedAdjacency& adj, const DenseMatrix& x,
                      const std::optional<DropoutKey>& dropout = std::nullopt,
                      ForwardCache* cache = nullptr) const {
    return stack_.forward(&adj, x, dropout, cache);
  }
  void backward(const NormalizedAdjacency& adj, const ForwardCache& cache, const DenseMatrix& grad) {
    stack_.backward(&adj, cache, grad);
  }

  LayerStack& stack() noexcept { return stack_; }
  const LayerStack& stack() const noexcept { return stack_; }

 private:
  LayerStack stack_;
};

/// Student: H = f_gamma(X).
class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(std::size_t in_dim, std::size_t num_classes, const LayerStackConfig& config,
           std::uint64_t init_seed)
      : stack_(in_dim, num_classes, config, init_seed, "mlp") {}
  explicit MlpModel(LayerStack stack) : stack_(std::move(stack)) {}

  DenseMatrix forward(const DenseMatrix& x, const std::optional<DropoutKey>& dropout = std::nullopt,
                      ForwardCache* cache = nullptr) const {
    return stack_.forward(nullptr, x, dropout, cache);
  }
  void backward(const ForwardCache& cache, const DenseMatrix& grad) { stack_.backward(nullptr, cache, grad); }

  LayerStack& stack() noexcept { return stack_; }
  const LayerStack& stack() const noexcept { return stack_; }

 private:
  LayerStack stack_;
};

/// Mean CE over `nodes` (tau = 1). Fills dL/dlogits when `grad` is given.
double masked_cross_entropy(const DenseMatrix& logits, const Labels& labels,
                            std::span<const NodeId> nodes, DenseMatrix* grad);

/// argmax accuracy over `nodes`, lowest class index wins ties. 0 for an empty set.
double accuracy(const DenseMatrix& logits, const Labels& labels, std::span<const NodeId> nodes);

struct SplitAccuracy {
  double train = 0.0;
  double val = 0.0;
  double test = 0.0;
};
SplitAccuracy evaluate_splits(const DenseMatrix& logits, const Dataset& ds);

struct TrainConfig {
  LayerStackConfig arch;
  AdamConfig optim;
  std::uint32_t epochs = 500;
};

/// Pre-softmax teacher logits of the selected epoch.
struct TeacherCheckpoint {
  DenseMatrix logits;
  double val_acc = 0.0;
  nlohmann::json config = nlohmann::json::object();
};

struct TeacherResult {
  GcnModel model;  // weights of the selected epoch
  TeacherCheckpoint checkpoint;
  SplitAccuracy accuracy;
  std::uint32_t best_epoch = 0;
  std::vector<double> train_loss;  // per epoch, train-mode CE on the labeled set
};

/// Full-batch CE training on the train split; keeps the epoch with the best
/// validation accuracy (earliest on ties). Logits are exported in eval mode.
TeacherResult train_teacher(const Dataset& ds, const NormalizedAdjacency& adj,
                            const TrainConfig& config, std::uint64_t seed);

// Checkpoint: "HGMDCKPT" | u32 version | u32 N | u32 C | f64 val_acc |
// N*C f64 logits | u32 json length | json config.
void save_checkpoint(const TeacherCheckpoint& ckpt, const std::filesystem::path& path);
TeacherCheckpoint load_checkpoint(const std::filesystem::path& path);

enum class ModelKind : std::uint32_t { Mlp = 0, Gcn = 1 };

struct ModelFile {
  ModelKind kind = ModelKind::Mlp;
  LayerStack stack;
  nlohmann::json config = nlohmann::json::object();
};

// Model: "HGMDMODL" | u32 version | u32 kind | u32 layers | f64 dropout |
// per layer (u32 rows, u32 cols, rows*cols f64 W, cols f64 b) | u32 json length | json.
void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

/// Reads the first eight bytes of a file.
std::string file_magic(const std::filesystem::path& path);

}  // namespace hgmd

#endif  // HGMD_MODELS_HPP
