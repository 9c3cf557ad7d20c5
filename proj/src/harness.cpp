#include "hgmd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <map>
#include <thread>

#include "hgmd/error.hpp"
#include "hgmd/hash.hpp"
#include "run_files.hpp"

namespace hgmd {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::fmt_double;

namespace layout {
fs::path teacher_dir(const fs::path& run) { return run / "teacher"; }
fs::path vanilla_dir(const fs::path& run) { return run / "vanilla_mlp"; }
fs::path scheme_dir(const fs::path& run, Scheme scheme) {
  return run / ("distill_" + std::string(scheme_name(scheme)));
}
fs::path checkpoint(const fs::path& dir, std::uint64_t seed) {
  return dir / ("seed_" + std::to_string(seed) + ".ckpt");
}
fs::path model(const fs::path& dir, std::uint64_t seed) { return dir / ("seed_" + std::to_string(seed) + ".model"); }
fs::path log(const fs::path& dir, std::uint64_t seed) { return dir / ("seed_" + std::to_string(seed) + ".log.jsonl"); }
fs::path memberships(const fs::path& dir, std::uint64_t seed) {
  return dir / ("seed_" + std::to_string(seed) + ".members.bin");
}
fs::path snapshot(const fs::path& dir, std::uint64_t seed) {
  return dir / ("seed_" + std::to_string(seed) + ".snapshot.csv");
}
}  // namespace layout

unsigned seed_job_limit(std::size_t jobs) {
  unsigned limit = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("HGMD_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw_config("HGMD_THREADS must be a positive integer, got '" + std::string(env) + "'");
    limit = static_cast<unsigned>(std::min<long>(v, 1024));
  }
  return static_cast<unsigned>(std::clamp<std::size_t>(jobs, 1, limit));
}

namespace {

// Runs fn(0..count-1) on up to seed_job_limit workers. Each job owns its
// outputs, so the worker count never changes results. The first failing job
// (by index) is rethrown after all jobs finish.
template <class Fn>
void run_jobs(std::size_t count, Fn&& fn) {
  const unsigned workers = seed_job_limit(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < count;) {
      try {
        fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

json accuracy_json(const SplitAccuracy& a) { return {{"train", a.train}, {"val", a.val}, {"test", a.test}}; }

json summary_json(std::span<const double> v) {
  const Summary s = summarize(v);
  return {{"mean", s.mean}, {"std", s.stddev}, {"min", s.min}, {"max", s.max}};
}

json aggregate_splits(std::span<const SplitAccuracy> accs) {
  std::vector<double> train, val, test;
  for (const auto& a : accs) {
    train.push_back(a.train);
    val.push_back(a.val);
    test.push_back(a.test);
  }
  return {{"train", summary_json(train)}, {"val", summary_json(val)}, {"test", summary_json(test)}};
}

// Content hash of a dataset directory: git-tree-like listing of its file hashes.
std::string dataset_hash(const fs::path& dir) {
  std::string listing;
  for (const char* name : {"edges.txt", "features.bin", "labels.txt", "meta.json", "split_test.txt",
                           "split_train.txt", "split_val.txt"}) {
    listing += git_blob_hash_file(dir / name) + " " + name + "\n";
  }
  return git_blob_hash(listing);
}

// The experiment identity: the echo without the output location, so that a
// run reproduced elsewhere yields byte-identical artifacts.
json identity(json echo) {
  echo.erase("output_dir");
  return echo;
}

std::string config_hash(const json& echo) { return git_blob_hash(identity(echo).dump()); }

json command_header(const char* command, const json& echo) {
  return {{"command", command}, {"config", identity(echo)}, {"config_hash", config_hash(echo)}};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_io("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string snapshot_csv(const EdgeSnapshot& snap, const Graph& g) {
  std::string out = "epoch,target,neighbor,probability,similarity,teacher_entropy_target,"
                    "teacher_entropy_neighbor,student_entropy_target\n";
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    for (std::size_t slot = g.offsets()[i]; slot < g.offsets()[i + 1]; ++slot) {
      const NodeId j = g.targets()[slot];
      out += std::to_string(snap.epoch) + "," + std::to_string(i) + "," + std::to_string(j) + "," +
             fmt_double(snap.probability[slot]) + "," + fmt_double(snap.similarity[slot]) + "," +
             fmt_double(snap.teacher_entropy[i]) + "," + fmt_double(snap.teacher_entropy[j]) + "," +
             fmt_double(snap.student_entropy[i]) + "\n";
    }
  }
  return out;
}

void check_logits_shape(const DenseMatrix& logits, const Dataset& ds, const fs::path& source) {
  if (logits.rows() != ds.num_nodes() || logits.cols() != ds.num_classes()) {
    throw_config(source.string() + ": shape mismatch, logits are " + std::to_string(logits.rows()) + "x" +
                 std::to_string(logits.cols()) + " but dataset has " + std::to_string(ds.num_nodes()) +
                 " nodes and " + std::to_string(ds.num_classes()) + " classes");
  }
}

struct StudentJobOutput {
  StudentResult result;
  json artifacts;
};

// Trains a student for one seed and writes its artifacts into `dir`.
StudentJobOutput run_student_job(const Dataset& ds, const DenseMatrix& teacher_logits, const StudentConfig& config,
                                 std::uint64_t seed, const fs::path& dir, const json& model_config) {
  StudentJobOutput out;
  out.result = train_student(ds, teacher_logits, config, seed);
  const StudentResult& r = out.result;

  TeacherCheckpoint logits{r.logits, r.accuracy.val, model_config};
  save_checkpoint(logits, layout::checkpoint(dir, seed));
  save_model(ModelFile{ModelKind::Mlp, r.model.stack(), model_config}, layout::model(dir, seed));
  detail::write_text_file(layout::log(dir, seed), JsonLines::encode(r.log));
  std::vector<fs::path> files{layout::checkpoint(dir, seed), layout::model(dir, seed), layout::log(dir, seed)};
  if (uses_subgraphs(config.distill.scheme)) {
    save_memberships(r.memberships, ds.graph.num_directed_edges(), layout::memberships(dir, seed));
    files.push_back(layout::memberships(dir, seed));
    if (r.snapshot) {
      detail::write_text_file(layout::snapshot(dir, seed), snapshot_csv(*r.snapshot, ds.graph));
      files.push_back(layout::snapshot(dir, seed));
    }
  }
  out.artifacts = json::object();
  for (const auto& f : files) out.artifacts[f.filename().string()] = git_blob_hash_file(f);
  return out;
}

}  // namespace

json cmd_train_teacher(const RunConfig& config) {
  config.validate();
  const Dataset ds = load_run_dataset(config);
  const NormalizedAdjacency adj = normalize_adjacency(ds.graph);
  const json echo = config.to_json();
  const fs::path dir = layout::teacher_dir(config.output_dir);
  ensure_dir(dir);
  detail::write_json_file(dir / "config.json", echo);

  const std::size_t n = config.seeds.size();
  std::vector<TeacherResult> results(n);
  run_jobs(n, [&](std::size_t k) {
    const std::uint64_t seed = config.seeds[k];
    TeacherResult r = train_teacher(ds, adj, config.teacher, seed);
    const json model_config = {{"role", "teacher"},
                               {"seed", seed},
                               {"dataset", ds.name},
                               {"row_normalize_features", config.row_normalize_features},
                               {"best_epoch", r.best_epoch},
                               {"config_hash", config_hash(echo)}};
    r.checkpoint.config = model_config;
    save_checkpoint(r.checkpoint, layout::checkpoint(dir, seed));
    save_model(ModelFile{ModelKind::Gcn, r.model.stack(), model_config}, layout::model(dir, seed));
    results[k] = std::move(r);
  });

  json metrics = command_header("train-teacher", echo);
  metrics["dataset"] = {{"name", ds.name}, {"content_hash", dataset_hash(config.dataset)}};
  metrics["seeds"] = json::array();
  std::vector<SplitAccuracy> accs;
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint64_t seed = config.seeds[k];
    const TeacherResult& r = results[k];
    accs.push_back(r.accuracy);
    metrics["seeds"].push_back({{"seed", seed},
                                {"best_epoch", r.best_epoch},
                                {"accuracy", accuracy_json(r.accuracy)},
                                {"checkpoint_hash", git_blob_hash_file(layout::checkpoint(dir, seed))},
                                {"model_hash", git_blob_hash_file(layout::model(dir, seed))}});
  }
  metrics["aggregate"] = aggregate_splits(accs);
  detail::write_json_file(dir / "metrics.json", metrics);
  return metrics;
}

json cmd_distill(const RunConfig& config, std::span<const Scheme> schemes) {
  config.validate();
  if (schemes.empty()) throw_config("distill: no scheme given");
  const Dataset ds = load_run_dataset(config);
  const fs::path run = config.output_dir;
  const fs::path tdir = layout::teacher_dir(run);
  const std::size_t n = config.seeds.size();

  // Seed-matched teachers; their hashes pin what every scheme must consume.
  std::map<std::uint64_t, std::string> recorded;
  if (fs::exists(tdir / "metrics.json")) {
    const json teacher_metrics = detail::read_json_file(tdir / "metrics.json");
    for (const auto& s : teacher_metrics.at("seeds")) {
      recorded[s.at("seed").get<std::uint64_t>()] = s.at("checkpoint_hash").get<std::string>();
    }
  }
  std::vector<TeacherCheckpoint> teachers(n);
  std::vector<std::string> teacher_hash(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint64_t seed = config.seeds[k];
    const fs::path path = layout::checkpoint(tdir, seed);
    if (!fs::exists(path)) {
      throw_config("missing teacher checkpoint for seed " + std::to_string(seed) + " (" + path.string() +
                   "); run train-teacher first");
    }
    teacher_hash[k] = git_blob_hash_file(path);
    if (auto it = recorded.find(seed); it != recorded.end() && it->second != teacher_hash[k]) {
      throw_config(path.string() + ": checkpoint differs from the one recorded by train-teacher");
    }
    teachers[k] = load_checkpoint(path);
    check_logits_shape(teachers[k].logits, ds, path);
  }
  auto assert_teacher_unchanged = [&](std::size_t k) {
    const fs::path path = layout::checkpoint(tdir, config.seeds[k]);
    if (git_blob_hash_file(path) != teacher_hash[k]) {
      throw_config(path.string() + ": teacher checkpoint changed during the comparison run");
    }
  };

  // Vanilla MLP: same student architecture and epochs, labels only.
  StudentConfig vanilla_cfg = config.student;
  vanilla_cfg.distill.scheme = Scheme::Glnn;
  vanilla_cfg.distill.beta = 1.0;
  const fs::path vdir = layout::vanilla_dir(run);
  ensure_dir(vdir);

  struct Job {
    std::size_t scheme;  // index into schemes, or schemes.size() for the vanilla MLP
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < n; ++k) jobs.push_back({schemes.size(), k});
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    ensure_dir(layout::scheme_dir(run, schemes[s]));
    for (std::size_t k = 0; k < n; ++k) jobs.push_back({s, k});
  }

  auto scheme_echo = [&](const StudentConfig& sc) {
    RunConfig c = config;
    c.student = sc;
    return c.to_json();
  };
  std::vector<StudentConfig> configs;
  for (Scheme s : schemes) {
    StudentConfig sc = config.student;
    sc.distill.scheme = s;
    configs.push_back(sc);
  }
  configs.push_back(vanilla_cfg);

  std::vector<StudentJobOutput> outputs(jobs.size());
  run_jobs(jobs.size(), [&](std::size_t j) {
    const Job job = jobs[j];
    const std::uint64_t seed = config.seeds[job.seed];
    const bool vanilla = job.scheme == schemes.size();
    const fs::path dir = vanilla ? vdir : layout::scheme_dir(run, schemes[job.scheme]);
    const json model_config = {{"role", vanilla ? "vanilla_mlp" : "student"},
                               {"scheme", vanilla ? "none" : std::string(scheme_name(schemes[job.scheme]))},
                               {"seed", seed},
                               {"dataset", ds.name},
                               {"row_normalize_features", config.row_normalize_features},
                               {"teacher_hash", teacher_hash[job.seed]},
                               {"config_hash", config_hash(scheme_echo(configs[job.scheme]))}};
    assert_teacher_unchanged(job.seed);
    outputs[j] = run_student_job(ds, teachers[job.seed].logits, configs[job.scheme], seed, dir, model_config);
  });

  std::vector<SplitAccuracy> teacher_acc(n);
  std::vector<SplitAccuracy> vanilla_acc(n);
  for (std::size_t k = 0; k < n; ++k) {
    teacher_acc[k] = evaluate_splits(teachers[k].logits, ds);
    vanilla_acc[k] = outputs[k].result.accuracy;
  }

  json vanilla_metrics = command_header("distill", scheme_echo(vanilla_cfg));
  vanilla_metrics["role"] = "vanilla_mlp";
  vanilla_metrics["seeds"] = json::array();
  for (std::size_t k = 0; k < n; ++k) {
    vanilla_metrics["seeds"].push_back({{"seed", config.seeds[k]},
                                        {"best_epoch", outputs[k].result.best_epoch},
                                        {"accuracy", accuracy_json(vanilla_acc[k])},
                                        {"artifacts", outputs[k].artifacts}});
  }
  vanilla_metrics["aggregate"] = aggregate_splits(vanilla_acc);
  detail::write_json_file(vdir / "metrics.json", vanilla_metrics);

  json result = {{"schemes", json::object()}};
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    const fs::path dir = layout::scheme_dir(run, schemes[s]);
    const json echo = scheme_echo(configs[s]);
    detail::write_json_file(dir / "config.json", echo);
    json metrics = command_header("distill", echo);
    metrics["scheme"] = std::string(scheme_name(schemes[s]));
    metrics["seeds"] = json::array();
    std::vector<SplitAccuracy> student_acc;
    for (std::size_t k = 0; k < n; ++k) {
      const StudentJobOutput& out = outputs[n + s * n + k];
      student_acc.push_back(out.result.accuracy);
      metrics["seeds"].push_back({{"seed", config.seeds[k]},
                                  {"teacher_hash", teacher_hash[k]},
                                  {"best_epoch", out.result.best_epoch},
                                  {"teacher", accuracy_json(teacher_acc[k])},
                                  {"vanilla_mlp", accuracy_json(vanilla_acc[k])},
                                  {"student", accuracy_json(out.result.accuracy)},
                                  {"artifacts", out.artifacts}});
    }
    metrics["aggregate"] = {{"teacher", aggregate_splits(teacher_acc)},
                            {"vanilla_mlp", aggregate_splits(vanilla_acc)},
                            {"student", aggregate_splits(student_acc)}};
    detail::write_json_file(dir / "metrics.json", metrics);
    result["schemes"][std::string(scheme_name(schemes[s]))] = std::move(metrics);
  }
  return result;
}

SplitAccuracy cmd_eval(const fs::path& model_path, const Dataset& ds) {
  validate_dataset(ds);
  const std::string magic = file_magic(model_path);
  DenseMatrix logits;
  if (magic == "HGMDCKPT") {
    logits = load_checkpoint(model_path).logits;
  } else if (magic == "HGMDMODL") {
    const ModelFile mf = load_model(model_path);
    if (mf.stack.in_dim() != ds.feature_dim() || mf.stack.out_dim() != ds.num_classes()) {
      throw_config(model_path.string() + ": shape mismatch, model maps " + std::to_string(mf.stack.in_dim()) +
                   " -> " + std::to_string(mf.stack.out_dim()) + " but dataset has " +
                   std::to_string(ds.feature_dim()) + " features and " + std::to_string(ds.num_classes()) +
                   " classes");
    }
    DenseMatrix x = ds.features;
    if (mf.config.value("row_normalize_features", false)) row_normalize(x);
    if (mf.kind == ModelKind::Gcn) {
      logits = GcnModel(mf.stack).forward(normalize_adjacency(ds.graph), x);
    } else {
      logits = MlpModel(mf.stack).forward(x);
    }
  } else {
    throw_config(model_path.string() + ": not a checkpoint or model file");
  }
  check_logits_shape(logits, ds, model_path);
  return evaluate_splits(logits, ds);
}

std::string JsonLines::encode(std::span<const LossReport> log) {
  std::string out;
  for (const LossReport& r : log) {
    const json line = {{"epoch", r.epoch},
                       {"ce", r.ce},
                       {"kd", r.kd},
                       {"total", r.total},
                       {"mean_subgraph_size", r.mean_subgraph_size},
                       {"mean_student_entropy", r.mean_student_entropy},
                       {"eta", r.eta}};
    out += line.dump() + "\n";
  }
  return out;
}

std::vector<LossReport> JsonLines::decode(const fs::path& path) {
  const std::string text = detail::read_text_file(path);
  std::vector<LossReport> log;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      LossReport r;
      r.epoch = j.at("epoch").get<std::uint32_t>();
      r.ce = j.at("ce").get<double>();
      r.kd = j.at("kd").get<double>();
      r.total = j.at("total").get<double>();
      r.mean_subgraph_size = j.at("mean_subgraph_size").get<double>();
      r.mean_student_entropy = j.at("mean_student_entropy").get<double>();
      r.eta = j.at("eta").get<double>();
      log.push_back(r);
    } catch (const json::exception& e) {
      throw_config(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

// "HGMDMEMB" | u32 version | u64 slots | u32 records | per record (u32 epoch, slots bytes).
void save_memberships(std::span<const MembershipRecord> records, std::size_t slots, const fs::path& path) {
  std::string bytes = "HGMDMEMB";
  auto put = [&bytes](const auto& v) { bytes.append(reinterpret_cast<const char*>(&v), sizeof v); };
  put(std::uint32_t{1});
  put(static_cast<std::uint64_t>(slots));
  put(static_cast<std::uint32_t>(records.size()));
  for (const MembershipRecord& r : records) {
    if (r.bits.size() != slots) throw_invalid("save_memberships: record size != slot count");
    put(r.epoch);
    bytes.append(reinterpret_cast<const char*>(r.bits.data()), r.bits.size());
  }
  detail::write_text_file(path, bytes);
}

std::vector<MembershipRecord> load_memberships(const fs::path& path) {
  const std::string bytes = detail::read_text_file(path);
  std::size_t pos = 0;
  auto take = [&](void* out, std::size_t n, const char* what) {
    if (bytes.size() - pos < n) {
      throw_config(path.filename().string() + ": truncated while reading " + what + " at byte " +
                   std::to_string(pos));
    }
    std::memcpy(out, bytes.data() + pos, n);
    pos += n;
  };
  char magic[8];
  take(magic, 8, "magic");
  if (std::memcmp(magic, "HGMDMEMB", 8) != 0) throw_config(path.filename().string() + ": magic mismatch");
  std::uint32_t version = 0;
  std::uint64_t slots = 0;
  std::uint32_t count = 0;
  take(&version, 4, "version");
  if (version != 1) throw_config(path.filename().string() + ": unsupported version " + std::to_string(version));
  take(&slots, 8, "slot count");
  take(&count, 4, "record count");
  std::vector<MembershipRecord> records(count);
  for (auto& r : records) {
    take(&r.epoch, 4, "epoch");
    r.bits.resize(slots);
    take(r.bits.data(), slots, "membership bits");
  }
  if (pos != bytes.size()) throw_config(path.filename().string() + ": trailing bytes");
  return records;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw_invalid("summarize: no values");
  Summary s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  // A rounded mean can step just outside [min, max]; keep the invariant.
  s.mean = std::clamp(s.mean, s.min, s.max);
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a;
    while (b + 1 < order.size() && v[order[b + 1]] == v[order[a]]) ++b;
    const double r = 0.5 * static_cast<double>(a + b) + 1.0;
    for (std::size_t k = a; k <= b; ++k) rank[order[k]] = r;
    a = b + 1;
  }
  return rank;
}

}  // namespace

double spearman_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw_invalid("spearman_correlation: length mismatch");
  if (a.size() < 2) throw_invalid("spearman_correlation: need at least two points");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double mean = 0.5 * static_cast<double>(a.size() + 1);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (ra[k] - mean) * (rb[k] - mean);
    saa += (ra[k] - mean) * (ra[k] - mean);
    sbb += (rb[k] - mean) * (rb[k] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace hgmd
