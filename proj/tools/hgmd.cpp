// hgmd command-line front end. Talks to the engine only through hgmd.h.
#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hgmd/hgmd.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

int exit_code(hgmd_status s) {
  switch (s) {
    case HGMD_OK:
      return kExitOk;
    case HGMD_ERR_CONFIG:
    case HGMD_ERR_INVALID_ARGUMENT:
      return kExitConfig;
    case HGMD_ERR_NUMERIC:
      return kExitNumeric;
    default:
      return kExitFailure;
  }
}

int report_failure(const char* command, hgmd_status s) {
  std::cerr << "hgmd " << command << ": " << hgmd_last_error() << "\n";
  return exit_code(s);
}

std::string shortest(double v) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  hgmd_string_free(s);
  return out;
}

int emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
    return kExitOk;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) {
    std::cerr << "hgmd: cannot write " << out_path << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

class ConfigHandle {
 public:
  hgmd_status load(const std::string& path) { return hgmd_config_load(path.c_str(), &h_); }
  ~ConfigHandle() { hgmd_config_free(h_); }
  const hgmd_config* get() const { return h_; }

 private:
  hgmd_config* h_ = nullptr;
};

int run_train_teacher(const std::string& config_path) {
  ConfigHandle cfg;
  if (auto s = cfg.load(config_path); s != HGMD_OK) return report_failure("train-teacher", s);
  char* summary = nullptr;
  if (auto s = hgmd_train_teacher(cfg.get(), &summary); s != HGMD_OK) return report_failure("train-teacher", s);
  return emit(take(summary), "");
}

int run_distill(const std::string& config_path, const std::vector<std::string>& schemes) {
  ConfigHandle cfg;
  if (auto s = cfg.load(config_path); s != HGMD_OK) return report_failure("distill", s);
  std::string list;
  for (const auto& name : schemes) list += (list.empty() ? "" : ",") + name;
  char* summary = nullptr;
  if (auto s = hgmd_distill(cfg.get(), list.empty() ? nullptr : list.c_str(), &summary); s != HGMD_OK) {
    return report_failure("distill", s);
  }
  return emit(take(summary), "");
}

int run_eval(const std::string& model, const std::string& data) {
  hgmd_dataset* ds = nullptr;
  if (auto s = hgmd_dataset_load(data.c_str(), &ds); s != HGMD_OK) return report_failure("eval", s);
  hgmd_accuracy acc{};
  const hgmd_status s = hgmd_eval(model.c_str(), ds, &acc);
  hgmd_dataset_free(ds);
  if (s != HGMD_OK) return report_failure("eval", s);
  return emit("{\"train\": " + shortest(acc.train) + ", \"val\": " + shortest(acc.val) +
                  ", \"test\": " + shortest(acc.test) + "}",
              "");
}

int run_report(const std::string& kind, const std::string& run, const std::string& options,
               const std::string& out_path) {
  char* text = nullptr;
  if (auto s = hgmd_report(kind.c_str(), run.c_str(), options.empty() ? nullptr : options.c_str(), &text);
      s != HGMD_OK) {
    return report_failure("report", s);
  }
  return emit(take(text), out_path);
}

int run_gen_sbm(const hgmd_sbm_params& params, const std::string& out_dir) {
  hgmd_dataset* ds = nullptr;
  if (auto s = hgmd_dataset_generate_sbm(&params, &ds); s != HGMD_OK) return report_failure("gen-data", s);
  const hgmd_status s = hgmd_dataset_write(ds, out_dir.c_str());
  hgmd_dataset_info info{};
  hgmd_dataset_info_get(ds, &info);
  hgmd_dataset_free(ds);
  if (s != HGMD_OK) return report_failure("gen-data", s);
  std::cout << "wrote " << out_dir << ": " << info.num_nodes << " nodes, " << info.num_edges << " edges, "
            << info.num_classes << " classes\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hardness-aware GNN-to-MLP distillation"};
  app.set_version_flag("--version", std::string(hgmd_version()));
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train-teacher", "Train one GCN teacher per seed");
  train->add_option("--config", config_path, "Run configuration (JSON)")->required();

  std::vector<std::string> schemes;
  auto* distill = app.add_subcommand("distill", "Distill the teachers into MLP students");
  distill->add_option("--config", config_path, "Run configuration (JSON)")->required();
  distill
      ->add_option("--scheme", schemes,
                   "glnn, loss-weight, hgmd-weight, hgmd-mixup or all (repeatable; default: from config)")
      ->delimiter(',');

  std::string model_path;
  std::string data_dir;
  auto* eval = app.add_subcommand("eval", "Accuracy per split of a model or checkpoint file");
  eval->add_option("--model", model_path)->required();
  eval->add_option("--data", data_dir)->required();

  std::string kind;
  std::string run_dir;
  std::string out_path;
  std::string report_scheme;
  std::optional<std::uint64_t> report_seed;
  bool invariant = false;
  auto* report = app.add_subcommand("report", "Diagnostics over a completed run directory");
  report->add_option("kind", kind, "buckets, asymmetry, hist3d or hardness")
      ->required()
      ->check(CLI::IsMember({"buckets", "asymmetry", "hist3d", "hardness"}));
  report->add_option("--run", run_dir, "Run directory (the config's output_dir)")->required();
  report->add_option("--out", out_path, "Write to a file instead of stdout");
  report->add_option("--scheme", report_scheme, "hardness: scheme to read student logits from");
  report->add_option("--seed", report_seed, "hardness: seed");
  report->add_flag("--invariant", invariant, "hardness: add the invariant-entropy column");

  hgmd_sbm_params sbm;
  hgmd_sbm_params_default(&sbm);
  std::uint32_t total_nodes = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->require_subcommand(1);
  auto* gen_sbm = gen->add_subcommand("sbm", "Stochastic block model");
  gen_sbm->add_option("--blocks", sbm.blocks, "Number of blocks (classes)")->capture_default_str();
  gen_sbm->add_option("--n", total_nodes, "Total nodes (split evenly across blocks)")->required();
  gen_sbm->add_option("--seed", sbm.seed)->capture_default_str();
  gen_sbm->add_option("--p-in", sbm.p_in, "Edge probability within a block")->capture_default_str();
  gen_sbm->add_option("--p-out", sbm.p_out, "Edge probability across blocks")->capture_default_str();
  gen_sbm->add_option("--dim", sbm.feature_dim, "Feature dimension")->capture_default_str();
  gen_sbm->add_option("--noise", sbm.noise_std, "Feature noise standard deviation")->capture_default_str();
  gen_sbm->add_option("--out", gen_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*train) return run_train_teacher(config_path);
  if (*distill) return run_distill(config_path, schemes);
  if (*eval) return run_eval(model_path, data_dir);
  if (*report) {
    std::string options;
    if (kind == "hardness") {
      options = "{";
      if (!report_scheme.empty()) options += "\"scheme\": \"" + report_scheme + "\", ";
      if (report_seed) options += "\"seed\": " + std::to_string(*report_seed) + ", ";
      options += std::string("\"invariant\": ") + (invariant ? "true" : "false") + "}";
    } else if (!report_scheme.empty() || report_seed || invariant) {
      std::cerr << "hgmd report: --scheme, --seed and --invariant apply to 'hardness' only\n";
      return kExitConfig;
    }
    return run_report(kind, run_dir, options, out_path);
  }
  if (*gen_sbm) {
    if (sbm.blocks == 0 || total_nodes % sbm.blocks != 0) {
      std::cerr << "hgmd gen-data: --n must be a positive multiple of --blocks\n";
      return kExitConfig;
    }
    sbm.nodes_per_block = total_nodes / sbm.blocks;
    return run_gen_sbm(sbm, gen_out);
  }
  return kExitConfig;
}
