#ifndef HGMD_HARNESS_HPP
#define HGMD_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgmd/hardness.hpp"
#include "hgmd/models.hpp"
#include "hgmd/student.hpp"

namespace hgmd {

/// Everything a run needs. Parsed from one JSON document; unknown keys are
/// rejected and every default is written back out by to_json().
struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path output_dir;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool row_normalize_features = false;
  TrainConfig teacher;
  StudentConfig student;
  InvariantEntropyConfig invariant;

  /// Relative paths resolve against `base_dir` (the config file's directory).
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  nlohmann::json to_json() const;
  /// Seeds non-empty, dataset directory present, hyperparameters in range.
  void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Dataset named by the config with the optional row normalization applied.
Dataset load_run_dataset(const RunConfig& config);

// Run directory layout, shared by the commands and the reports.
namespace layout {
std::filesystem::path teacher_dir(const std::filesystem::path& run);
std::filesystem::path vanilla_dir(const std::filesystem::path& run);
std::filesystem::path scheme_dir(const std::filesystem::path& run, Scheme scheme);
std::filesystem::path checkpoint(const std::filesystem::path& dir, std::uint64_t seed);
std::filesystem::path model(const std::filesystem::path& dir, std::uint64_t seed);
std::filesystem::path log(const std::filesystem::path& dir, std::uint64_t seed);
std::filesystem::path memberships(const std::filesystem::path& dir, std::uint64_t seed);
std::filesystem::path snapshot(const std::filesystem::path& dir, std::uint64_t seed);
}  // namespace layout

/// Parallel seed jobs: HGMD_THREADS when set (>= 1), else hardware threads.
unsigned seed_job_limit(std::size_t jobs);

/// Trains one teacher per seed, writes checkpoints, model files and
/// teacher/metrics.json. Returns the metrics document.
nlohmann::json cmd_train_teacher(const RunConfig& config);

/// Distills every scheme for every seed from the seed-matched teacher
/// checkpoint (hash-verified to be the same file for all schemes), plus the
/// vanilla MLP baseline. Returns {"schemes": {name: metrics}}.
nlohmann::json cmd_distill(const RunConfig& config, std::span<const Scheme> schemes);

/// Accuracy per split of a checkpoint (logits) or model file on a dataset.
SplitAccuracy cmd_eval(const std::filesystem::path& model_path, const Dataset& ds);

struct JsonLines {
  static std::string encode(std::span<const LossReport> log);
  static std::vector<LossReport> decode(const std::filesystem::path& path);
};

void save_memberships(std::span<const MembershipRecord> records, std::size_t slots,
                      const std::filesystem::path& path);
std::vector<MembershipRecord> load_memberships(const std::filesystem::path& path);

// Reports. Read-only over a run directory; each returns its text.

/// Test nodes split at the median teacher entropy (ties -> simple); accuracy
/// per bucket for the teacher, vanilla MLP and every distilled scheme.
std::string report_buckets(const std::filesystem::path& run_dir);

/// Over undirected edges: fraction sampled in exactly one direction, both, or
/// neither, averaged over the recorded trailing epochs.
nlohmann::json report_asymmetry(const std::filesystem::path& run_dir);

/// Mean sampling probability on 10x10 grids over (H(z_j), H(z_i)) and
/// (similarity, H(z_i)). Long-form CSV of populated bins.
std::string report_hist3d(const std::filesystem::path& run_dir);

struct HardnessReportOptions {
  std::optional<Scheme> scheme;
  std::optional<std::uint64_t> seed;
  bool invariant = false;
};
/// node_id,teacher_entropy,student_entropy[,invariant_entropy]
std::string report_hardness(const std::filesystem::path& run_dir, const HardnessReportOptions& options);

// Pure computations behind the reports.

struct BucketAccuracy {
  std::size_t simple_count = 0;
  std::size_t hard_count = 0;
  double simple = 0.0;
  double hard = 0.0;
};
/// Splits `nodes` at the median of `teacher_entropy` (mean of the two middle
/// values for an even count); nodes at or below the median are simple.
BucketAccuracy bucket_accuracy(const DenseMatrix& logits, const Labels& labels, std::span<const NodeId> nodes,
                               std::span<const double> teacher_entropy);

struct AsymmetryStats {
  std::size_t epochs = 0;
  double one_direction = 0.0;  // fraction of undirected edges, averaged over epochs
  double both = 0.0;
  double neither = 0.0;
  double one_of_sampled = 0.0;  // exactly-one / (exactly-one + both), averaged over epochs with any
};
AsymmetryStats asymmetry_stats(const Graph& g, std::span<const MembershipRecord> records);

struct HistBin {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::size_t count = 0;
  double mean = 0.0;
};
/// 10x10 grid over [0, x_max] x [0, y_max]; values at the upper edge land in the last bin.
std::vector<HistBin> histogram2d(std::span<const double> x, double x_max, std::span<const double> y, double y_max,
                                 std::span<const double> values, std::uint32_t bins = 10);

// Small statistics helpers used by the reports and the acceptance suite.
struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one value
  double min = 0.0;
  double max = 0.0;
};
Summary summarize(std::span<const double> values);
double spearman_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace hgmd

#endif  // HGMD_HARNESS_HPP
