#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "hgmd/error.hpp"
#include "hgmd/harness.hpp"

namespace hgmd {

using nlohmann::json;

namespace {

// Reads optional keys from one JSON object and rejects any key it was not asked about.
class Section {
 public:
  Section(const json& j, std::string name) : name_(std::move(name)) {
    if (j.is_null()) return;
    if (!j.is_object()) throw_config("config: '" + name_ + "' must be an object");
    obj_ = &j;
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception&) {
      throw_config("config: '" + qualified(key) + "' has the wrong type");
    }
  }

  const json& child(const char* key) {
    static const json null_value;
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return null_value;
    return obj_->at(key);
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& item : obj_->items()) {
      if (!seen_.count(item.key())) throw_config("config: unknown key '" + qualified(item.key().c_str()) + "'");
    }
  }

 private:
  std::string qualified(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

void read_arch(Section& s, LayerStackConfig& arch, AdamConfig& optim) {
  s.get("layers", arch.layers);
  s.get("hidden", arch.hidden);
  s.get("dropout", arch.dropout);
  s.get("lr", optim.lr);
  s.get("weight_decay", optim.weight_decay);
  s.get("adam_beta1", optim.beta1);
  s.get("adam_beta2", optim.beta2);
  s.get("adam_eps", optim.eps);
}

json arch_json(const LayerStackConfig& arch, const AdamConfig& optim) {
  return {{"layers", arch.layers},   {"hidden", arch.hidden},         {"dropout", arch.dropout},
          {"lr", optim.lr},          {"weight_decay", optim.weight_decay}, {"adam_beta1", optim.beta1},
          {"adam_beta2", optim.beta2}, {"adam_eps", optim.eps}};
}

void validate_arch(const char* who, const LayerStackConfig& arch, const AdamConfig& optim) {
  const std::string w(who);
  if (arch.layers < 1) throw_config(w + ".layers must be >= 1");
  if (arch.layers > 1 && arch.hidden < 1) throw_config(w + ".hidden must be >= 1");
  if (!(arch.dropout >= 0.0 && arch.dropout < 1.0)) throw_config(w + ".dropout must be in [0, 1)");
  if (!(optim.lr > 0.0)) throw_config(w + ".lr must be > 0");
  if (!(optim.weight_decay >= 0.0)) throw_config(w + ".weight_decay must be >= 0");
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0) || !(optim.beta2 >= 0.0 && optim.beta2 < 1.0)) {
    throw_config(w + ": adam betas must be in [0, 1)");
  }
  if (!(optim.eps > 0.0)) throw_config(w + ".adam_eps must be > 0");
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw_config("config: top level must be a JSON object");
  RunConfig c;
  Section top(j, "");

  std::string dataset;
  std::string output_dir;
  top.get("dataset", dataset);
  top.get("output_dir", output_dir);
  if (dataset.empty()) throw_config("config: 'dataset' is required");
  if (output_dir.empty()) throw_config("config: 'output_dir' is required");
  c.dataset = resolve(dataset, base_dir);
  c.output_dir = resolve(output_dir, base_dir);
  top.get("seeds", c.seeds);
  top.get("row_normalize_features", c.row_normalize_features);

  Section teacher(top.child("teacher"), "teacher");
  read_arch(teacher, c.teacher.arch, c.teacher.optim);
  teacher.get("epochs", c.teacher.epochs);
  teacher.finish();

  Section student(top.child("student"), "student");
  read_arch(student, c.student.arch, c.student.optim);
  student.finish();

  DistillConfig& d = c.student.distill;
  Section distill(top.child("distill"), "distill");
  std::string scheme(scheme_name(d.scheme));
  distill.get("scheme", scheme);
  d.scheme = parse_scheme(scheme);
  distill.get("tau", d.tau);
  distill.get("beta", d.beta);
  distill.get("alpha", d.alpha);
  distill.get("eta0", d.eta.eta0);
  distill.get("eta_decay_step", d.eta.decay_step);
  distill.get("eta_decay_rate", d.eta.decay_rate);
  distill.get("epochs", d.epochs);
  distill.get("kd_tau_squared", d.kd_tau_squared);
  distill.get("strict_literal_weight", d.strict_literal_weight);
  distill.get("snapshot_epoch", d.snapshot_epoch);
  distill.get("asymmetry_window", d.asymmetry_window);
  distill.finish();

  Section inv(top.child("invariant_entropy"), "invariant_entropy");
  inv.get("delta", c.invariant.delta);
  inv.get("num_samples", c.invariant.num_samples);
  inv.get("seed", c.invariant.seed);
  inv.finish();

  top.finish();
  return c;
}

json RunConfig::to_json() const {
  const DistillConfig& d = student.distill;
  json t = arch_json(teacher.arch, teacher.optim);
  t["epochs"] = teacher.epochs;
  return {
      {"dataset", dataset.string()},
      {"output_dir", output_dir.string()},
      {"seeds", seeds},
      {"row_normalize_features", row_normalize_features},
      {"teacher", t},
      {"student", arch_json(student.arch, student.optim)},
      {"distill",
       {{"scheme", std::string(scheme_name(d.scheme))},
        {"tau", d.tau},
        {"beta", d.beta},
        {"alpha", d.alpha},
        {"eta0", d.eta.eta0},
        {"eta_decay_step", d.eta.decay_step},
        {"eta_decay_rate", d.eta.decay_rate},
        {"epochs", d.epochs},
        {"kd_tau_squared", d.kd_tau_squared},
        {"strict_literal_weight", d.strict_literal_weight},
        {"snapshot_epoch", d.snapshot_epoch},
        {"asymmetry_window", d.asymmetry_window}}},
      {"invariant_entropy",
       {{"delta", invariant.delta}, {"num_samples", invariant.num_samples}, {"seed", invariant.seed}}},
  };
}

void RunConfig::validate() const {
  if (seeds.empty()) throw_config("config: 'seeds' must not be empty");
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw_config("config: 'seeds' contains duplicates");
  std::error_code ec;
  if (!std::filesystem::is_directory(dataset, ec)) {
    throw_config("config: dataset directory not found: " + dataset.string());
  }
  validate_arch("teacher", teacher.arch, teacher.optim);
  validate_arch("student", student.arch, student.optim);
  if (teacher.epochs < 1) throw_config("teacher.epochs must be >= 1");
  student.distill.validate();
  if (!(invariant.delta > 0.0)) throw_config("invariant_entropy.delta must be > 0");
  if (invariant.num_samples < 1) throw_config("invariant_entropy.num_samples must be >= 1");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_config("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw_config(path.string() + ": invalid JSON: " + e.what());
  }
  auto base = std::filesystem::absolute(path).parent_path();
  RunConfig c = RunConfig::from_json(j, base);
  c.validate();
  return c;
}

Dataset load_run_dataset(const RunConfig& config) {
  Dataset ds = load_dataset(config.dataset);
  if (config.row_normalize_features) row_normalize(ds.features);
  return ds;
}

}  // namespace hgmd
