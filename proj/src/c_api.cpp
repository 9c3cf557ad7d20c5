#include "hgmd/hgmd.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "hgmd/error.hpp"
#include "hgmd/harness.hpp"

struct hgmd_dataset {
  hgmd::Dataset ds;
};
struct hgmd_checkpoint {
  hgmd::TeacherCheckpoint ckpt;
};
struct hgmd_config {
  hgmd::RunConfig config;
};

namespace {

thread_local std::string g_last_error;

hgmd_status fail(hgmd_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <class Fn>
hgmd_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return HGMD_OK;
  } catch (const hgmd::Error& e) {
    switch (e.kind()) {
      case hgmd::ErrorKind::Config:
        return fail(HGMD_ERR_CONFIG, e.what());
      case hgmd::ErrorKind::Numeric:
        return fail(HGMD_ERR_NUMERIC, e.what());
      case hgmd::ErrorKind::InvalidArgument:
        return fail(HGMD_ERR_INVALID_ARGUMENT, e.what());
      case hgmd::ErrorKind::Io:
        return fail(HGMD_ERR_IO, e.what());
    }
    return fail(HGMD_ERR_INTERNAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(HGMD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(HGMD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(HGMD_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_output(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

void require(const void* p, const char* what) {
  if (!p) hgmd::throw_invalid(std::string(what) + " must not be NULL");
}

std::vector<hgmd::Scheme> parse_scheme_list(const char* list, hgmd::Scheme fallback) {
  using hgmd::Scheme;
  if (!list || !*list) return {fallback};
  const std::string text(list);
  if (text == "all") return {Scheme::Glnn, Scheme::LossWeight, Scheme::HgmdWeight, Scheme::HgmdMixup};
  std::vector<Scheme> out;
  std::stringstream ss(text);
  for (std::string name; std::getline(ss, name, ',');) {
    const Scheme s = hgmd::parse_scheme(name);
    for (Scheme seen : out) {
      if (seen == s) hgmd::throw_config("scheme listed twice: " + name);
    }
    out.push_back(s);
  }
  if (out.empty()) hgmd::throw_config("empty scheme list");
  return out;
}

}  // namespace

extern "C" {

const char* hgmd_version(void) { return "0.1.0"; }

const char* hgmd_last_error(void) { return g_last_error.c_str(); }

void hgmd_string_free(char* s) { std::free(s); }

void hgmd_sbm_params_default(hgmd_sbm_params* params) {
  if (!params) return;
  const hgmd::SbmParams d;
  *params = {d.blocks, d.nodes_per_block, d.p_in, d.p_out, d.feature_dim, d.noise_std, d.seed};
}

hgmd_status hgmd_dataset_load(const char* dir, hgmd_dataset** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = nullptr;
    auto* h = new hgmd_dataset{hgmd::load_dataset(dir)};
    *out = h;
  });
}

hgmd_status hgmd_dataset_generate_sbm(const hgmd_sbm_params* params, hgmd_dataset** out) {
  return guarded([&] {
    require(params, "params");
    require(out, "out");
    *out = nullptr;
    hgmd::SbmParams p;
    p.blocks = params->blocks;
    p.nodes_per_block = params->nodes_per_block;
    p.p_in = params->p_in;
    p.p_out = params->p_out;
    p.feature_dim = params->feature_dim;
    p.noise_std = params->noise_std;
    p.seed = params->seed;
    *out = new hgmd_dataset{hgmd::gen_synthetic_sbm(p)};
  });
}

hgmd_status hgmd_dataset_write(const hgmd_dataset* ds, const char* dir) {
  return guarded([&] {
    require(ds, "dataset");
    require(dir, "dir");
    hgmd::write_dataset(ds->ds, dir);
  });
}

hgmd_status hgmd_dataset_info_get(const hgmd_dataset* ds, hgmd_dataset_info* info) {
  return guarded([&] {
    require(ds, "dataset");
    require(info, "info");
    const hgmd::Dataset& d = ds->ds;
    info->num_nodes = d.num_nodes();
    info->feature_dim = static_cast<uint32_t>(d.feature_dim());
    info->num_classes = d.num_classes();
    info->num_edges = d.graph.num_undirected_edges();
    info->train_size = static_cast<uint32_t>(d.splits.train.size());
    info->val_size = static_cast<uint32_t>(d.splits.val.size());
    info->test_size = static_cast<uint32_t>(d.splits.test.size());
    info->duplicate_edges = d.duplicate_edges;
  });
}

void hgmd_dataset_free(hgmd_dataset* ds) { delete ds; }

hgmd_status hgmd_checkpoint_load(const char* path, hgmd_checkpoint** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = new hgmd_checkpoint{hgmd::load_checkpoint(path)};
  });
}

hgmd_status hgmd_checkpoint_shape(const hgmd_checkpoint* ckpt, uint32_t* num_nodes, uint32_t* num_classes,
                                  double* val_acc) {
  return guarded([&] {
    require(ckpt, "checkpoint");
    if (num_nodes) *num_nodes = static_cast<uint32_t>(ckpt->ckpt.logits.rows());
    if (num_classes) *num_classes = static_cast<uint32_t>(ckpt->ckpt.logits.cols());
    if (val_acc) *val_acc = ckpt->ckpt.val_acc;
  });
}

hgmd_status hgmd_checkpoint_logits(const hgmd_checkpoint* ckpt, double* out, size_t capacity) {
  return guarded([&] {
    require(ckpt, "checkpoint");
    require(out, "out");
    const auto& values = ckpt->ckpt.logits.values();
    if (capacity < values.size()) {
      hgmd::throw_invalid("buffer holds " + std::to_string(capacity) + " doubles, need " +
                          std::to_string(values.size()));
    }
    std::memcpy(out, values.data(), values.size() * sizeof(double));
  });
}

void hgmd_checkpoint_free(hgmd_checkpoint* ckpt) { delete ckpt; }

hgmd_status hgmd_config_load(const char* path, hgmd_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = new hgmd_config{hgmd::load_run_config(path)};
  });
}

hgmd_status hgmd_config_echo(const hgmd_config* config, char** json_out) {
  return guarded([&] {
    require(config, "config");
    require(json_out, "json_out");
    *json_out = dup_string(config->config.to_json().dump(2));
  });
}

void hgmd_config_free(hgmd_config* config) { delete config; }

hgmd_status hgmd_train_teacher(const hgmd_config* config, char** summary_json) {
  return guarded([&] {
    require(config, "config");
    if (summary_json) *summary_json = nullptr;
    set_output(summary_json, hgmd::cmd_train_teacher(config->config).dump(2));
  });
}

hgmd_status hgmd_distill(const hgmd_config* config, const char* schemes, char** summary_json) {
  return guarded([&] {
    require(config, "config");
    if (summary_json) *summary_json = nullptr;
    const auto list = parse_scheme_list(schemes, config->config.student.distill.scheme);
    set_output(summary_json, hgmd::cmd_distill(config->config, list).dump(2));
  });
}

hgmd_status hgmd_eval(const char* model_path, const hgmd_dataset* ds, hgmd_accuracy* out) {
  return guarded([&] {
    require(model_path, "model_path");
    require(ds, "dataset");
    require(out, "out");
    const hgmd::SplitAccuracy a = hgmd::cmd_eval(model_path, ds->ds);
    *out = {a.train, a.val, a.test};
  });
}

hgmd_status hgmd_report(const char* kind, const char* run_dir, const char* options_json, char** text_out) {
  return guarded([&] {
    require(kind, "kind");
    require(run_dir, "run_dir");
    require(text_out, "text_out");
    *text_out = nullptr;
    nlohmann::json options = nlohmann::json::object();
    if (options_json && *options_json) {
      try {
        options = nlohmann::json::parse(options_json);
      } catch (const nlohmann::json::parse_error& e) {
        hgmd::throw_config(std::string("report options: ") + e.what());
      }
      if (!options.is_object()) hgmd::throw_config("report options must be a JSON object");
    }
    const std::string k(kind);
    std::string text;
    if (k == "buckets") {
      text = hgmd::report_buckets(run_dir);
    } else if (k == "asymmetry") {
      text = hgmd::report_asymmetry(run_dir).dump(2) + "\n";
    } else if (k == "hist3d") {
      text = hgmd::report_hist3d(run_dir);
    } else if (k == "hardness") {
      hgmd::HardnessReportOptions o;
      try {
        for (const auto& item : options.items()) {
          if (item.key() == "scheme") {
            o.scheme = hgmd::parse_scheme(item.value().get<std::string>());
          } else if (item.key() == "seed") {
            o.seed = item.value().get<std::uint64_t>();
          } else if (item.key() == "invariant") {
            o.invariant = item.value().get<bool>();
          } else {
            hgmd::throw_config("unknown report option '" + item.key() + "'");
          }
        }
      } catch (const nlohmann::json::exception& e) {
        hgmd::throw_config(std::string("report options: ") + e.what());
      }
      text = hgmd::report_hardness(run_dir, o);
    } else {
      hgmd::throw_config("unknown report kind '" + k + "' (expected buckets, asymmetry, hist3d or hardness)");
    }
    *text_out = dup_string(text);
  });
}

}  // extern "C"
