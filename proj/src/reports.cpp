#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "hgmd/error.hpp"
#include "hgmd/harness.hpp"
#include "hgmd/tensor.hpp"
#include "run_files.hpp"

namespace hgmd {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::fmt_double;

BucketAccuracy bucket_accuracy(const DenseMatrix& logits, const Labels& labels, std::span<const NodeId> nodes,
                               std::span<const double> teacher_entropy) {
  BucketAccuracy b;
  if (nodes.empty()) return b;
  std::vector<double> h;
  h.reserve(nodes.size());
  for (NodeId i : nodes) h.push_back(teacher_entropy[i]);
  std::sort(h.begin(), h.end());
  const std::size_t m = h.size() / 2;
  const double median = h.size() % 2 ? h[m] : 0.5 * (h[m - 1] + h[m]);

  std::size_t simple_ok = 0, hard_ok = 0;
  for (NodeId i : nodes) {
    const bool ok = argmax(logits.row(i)) == labels.y[i];
    if (teacher_entropy[i] <= median) {
      ++b.simple_count;
      simple_ok += ok;
    } else {
      ++b.hard_count;
      hard_ok += ok;
    }
  }
  if (b.simple_count) b.simple = static_cast<double>(simple_ok) / static_cast<double>(b.simple_count);
  if (b.hard_count) b.hard = static_cast<double>(hard_ok) / static_cast<double>(b.hard_count);
  return b;
}

AsymmetryStats asymmetry_stats(const Graph& g, std::span<const MembershipRecord> records) {
  AsymmetryStats s;
  const auto reverse = g.reverse_slots();
  const double edges = static_cast<double>(g.num_undirected_edges());
  std::size_t sampled_epochs = 0;
  for (const MembershipRecord& r : records) {
    if (r.bits.size() != g.num_directed_edges()) {
      throw_config("membership record for epoch " + std::to_string(r.epoch) + " does not match the graph");
    }
    std::size_t one = 0, both = 0, neither = 0;
    for (NodeId i = 0; i < g.num_nodes(); ++i) {
      for (std::size_t slot = g.offsets()[i]; slot < g.offsets()[i + 1]; ++slot) {
        if (g.targets()[slot] < i) continue;
        const bool a = r.bits[slot] != 0;
        const bool b = r.bits[reverse[slot]] != 0;
        if (a && b) {
          ++both;
        } else if (a || b) {
          ++one;
        } else {
          ++neither;
        }
      }
    }
    ++s.epochs;
    if (edges > 0) {
      s.one_direction += static_cast<double>(one) / edges;
      s.both += static_cast<double>(both) / edges;
      s.neither += static_cast<double>(neither) / edges;
    }
    if (one + both > 0) {
      s.one_of_sampled += static_cast<double>(one) / static_cast<double>(one + both);
      ++sampled_epochs;
    }
  }
  if (s.epochs) {
    const double e = static_cast<double>(s.epochs);
    s.one_direction /= e;
    s.both /= e;
    s.neither /= e;
  }
  if (sampled_epochs) s.one_of_sampled /= static_cast<double>(sampled_epochs);
  return s;
}

std::vector<HistBin> histogram2d(std::span<const double> x, double x_max, std::span<const double> y, double y_max,
                                 std::span<const double> values, std::uint32_t bins) {
  if (x.size() != y.size() || x.size() != values.size()) throw_invalid("histogram2d: length mismatch");
  if (bins == 0) throw_invalid("histogram2d: bins must be >= 1");
  auto bin_of = [bins](double v, double max) -> std::uint32_t {
    if (!(max > 0.0) || !(v > 0.0)) return 0;
    const double b = std::floor(v / max * bins);
    return static_cast<std::uint32_t>(std::min<double>(b, bins - 1));
  };
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<std::size_t, double>> acc;
  for (std::size_t k = 0; k < x.size(); ++k) {
    auto& cell = acc[{bin_of(x[k], x_max), bin_of(y[k], y_max)}];
    ++cell.first;
    cell.second += values[k];
  }
  std::vector<HistBin> out;
  for (const auto& [key, cell] : acc) {
    out.push_back({key.first, key.second, cell.first, cell.second / static_cast<double>(cell.first)});
  }
  return out;
}

namespace {

constexpr Scheme kAllSchemes[] = {Scheme::Glnn, Scheme::LossWeight, Scheme::HgmdWeight, Scheme::HgmdMixup};

struct SchemeRun {
  Scheme scheme;
  fs::path dir;
  RunConfig config;
};

struct RunContext {
  fs::path run;
  RunConfig teacher_config;
  Dataset ds;
  std::vector<SchemeRun> schemes;

  const SchemeRun& scheme(Scheme s) const {
    for (const auto& r : schemes) {
      if (r.scheme == s) return r;
    }
    throw_config("missing artifacts: no distill run for scheme " + std::string(scheme_name(s)) + " in " +
                 run.string());
  }
};

RunContext open_run(const fs::path& run) {
  RunContext ctx;
  ctx.run = run;
  const fs::path tdir = layout::teacher_dir(run);
  ctx.teacher_config = RunConfig::from_json(detail::read_json_file(tdir / "config.json"), tdir);
  ctx.ds = load_run_dataset(ctx.teacher_config);
  for (Scheme s : kAllSchemes) {
    const fs::path dir = layout::scheme_dir(run, s);
    if (!fs::exists(dir / "metrics.json")) continue;
    ctx.schemes.push_back({s, dir, RunConfig::from_json(detail::read_json_file(dir / "config.json"), dir)});
  }
  return ctx;
}

DenseMatrix load_logits(const fs::path& path, const Dataset& ds) {
  DenseMatrix logits = load_checkpoint(path).logits;
  if (logits.rows() != ds.num_nodes() || logits.cols() != ds.num_classes()) {
    throw_config(path.string() + ": logits do not match the run's dataset");
  }
  return logits;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
  return fields;
}

}  // namespace

std::string report_buckets(const fs::path& run_dir) {
  const RunContext ctx = open_run(run_dir);
  if (ctx.schemes.empty()) throw_config("missing artifacts: no distill_* results in " + run_dir.string());
  const Dataset& ds = ctx.ds;
  const double base_tau = ctx.schemes.front().config.student.distill.tau;

  struct Row {
    std::string model;
    fs::path dir;
    double tau;
    std::vector<std::uint64_t> seeds;
  };
  std::vector<Row> rows{{"teacher", layout::teacher_dir(run_dir), base_tau, ctx.teacher_config.seeds},
                        {"vanilla_mlp", layout::vanilla_dir(run_dir), base_tau, ctx.schemes.front().config.seeds}};
  for (const auto& s : ctx.schemes) {
    rows.push_back({std::string(scheme_name(s.scheme)), s.dir, s.config.student.distill.tau, s.config.seeds});
  }

  std::string out = "model,seed,bucket,count,accuracy\n";
  for (const Row& row : rows) {
    std::vector<double> simple, hard;
    for (std::uint64_t seed : row.seeds) {
      const DenseMatrix teacher = load_logits(layout::checkpoint(layout::teacher_dir(run_dir), seed), ds);
      const DenseMatrix logits = load_logits(layout::checkpoint(row.dir, seed), ds);
      const auto h = row_entropies(teacher, row.tau);
      const BucketAccuracy b = bucket_accuracy(logits, ds.labels, ds.splits.test, h);
      const std::string s = std::to_string(seed);
      out += row.model + "," + s + ",simple," + std::to_string(b.simple_count) + "," + fmt_double(b.simple) + "\n";
      out += row.model + "," + s + ",hard," + std::to_string(b.hard_count) + "," + fmt_double(b.hard) + "\n";
      simple.push_back(b.simple);
      hard.push_back(b.hard);
    }
    out += row.model + ",mean,simple,," + fmt_double(summarize(simple).mean) + "\n";
    out += row.model + ",mean,hard,," + fmt_double(summarize(hard).mean) + "\n";
  }
  return out;
}

json report_asymmetry(const fs::path& run_dir) {
  const RunContext ctx = open_run(run_dir);
  json out = {{"undirected_edges", ctx.ds.graph.num_undirected_edges()}, {"schemes", json::object()}};
  for (const auto& s : ctx.schemes) {
    if (!uses_subgraphs(s.scheme)) continue;
    json per_seed = json::array();
    std::vector<double> one, both, neither, of_sampled;
    for (std::uint64_t seed : s.config.seeds) {
      const auto records = load_memberships(layout::memberships(s.dir, seed));
      const AsymmetryStats st = asymmetry_stats(ctx.ds.graph, records);
      per_seed.push_back({{"seed", seed},
                          {"epochs", st.epochs},
                          {"asymmetric_fraction", st.one_direction},
                          {"both_fraction", st.both},
                          {"neither_fraction", st.neither},
                          {"asymmetric_fraction_of_sampled", st.one_of_sampled}});
      one.push_back(st.one_direction);
      both.push_back(st.both);
      neither.push_back(st.neither);
      of_sampled.push_back(st.one_of_sampled);
    }
    out["schemes"][std::string(scheme_name(s.scheme))] = {
        {"per_seed", per_seed},
        {"mean",
         {{"asymmetric_fraction", summarize(one).mean},
          {"both_fraction", summarize(both).mean},
          {"neither_fraction", summarize(neither).mean},
          {"asymmetric_fraction_of_sampled", summarize(of_sampled).mean}}}};
  }
  if (out["schemes"].empty()) throw_config("missing artifacts: no sampled-subgraph scheme in " + run_dir.string());
  return out;
}

std::string report_hist3d(const fs::path& run_dir) {
  const RunContext ctx = open_run(run_dir);
  const double h_max = std::log(static_cast<double>(ctx.ds.num_classes()));
  constexpr std::uint32_t kBins = 10;
  std::string out = "scheme,grid,x_bin,y_bin,x_lo,x_hi,y_lo,y_hi,count,mean_probability\n";
  bool any = false;
  for (const auto& s : ctx.schemes) {
    if (!uses_subgraphs(s.scheme)) continue;
    std::vector<double> p, sim, hz_i, hz_j;
    for (std::uint64_t seed : s.config.seeds) {
      const fs::path path = layout::snapshot(s.dir, seed);
      std::stringstream text(detail::read_text_file(path));
      std::string line;
      std::getline(text, line);
      for (std::size_t line_no = 2; std::getline(text, line); ++line_no) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 8) throw_config(path.string() + ":" + std::to_string(line_no) + ": expected 8 fields");
        p.push_back(std::stod(f[3]));
        sim.push_back(std::stod(f[4]));
        hz_i.push_back(std::stod(f[5]));
        hz_j.push_back(std::stod(f[6]));
      }
    }
    any = true;
    const std::string name(scheme_name(s.scheme));
    auto emit = [&](const char* grid, const std::vector<HistBin>& bins, double x_max, double y_max) {
      for (const HistBin& b : bins) {
        out += name + "," + grid + "," + std::to_string(b.x) + "," + std::to_string(b.y) + "," +
               fmt_double(x_max * b.x / kBins) + "," + fmt_double(x_max * (b.x + 1) / kBins) + "," +
               fmt_double(y_max * b.y / kBins) + "," + fmt_double(y_max * (b.y + 1) / kBins) + "," +
               std::to_string(b.count) + "," + fmt_double(b.mean) + "\n";
      }
    };
    emit("neighbor_entropy_vs_target_entropy", histogram2d(hz_j, h_max, hz_i, h_max, p, kBins), h_max, h_max);
    emit("similarity_vs_target_entropy", histogram2d(sim, 1.0, hz_i, h_max, p, kBins), 1.0, h_max);
  }
  if (!any) throw_config("missing artifacts: no sampled-subgraph scheme in " + run_dir.string());
  return out;
}

std::string report_hardness(const fs::path& run_dir, const HardnessReportOptions& options) {
  const RunContext ctx = open_run(run_dir);
  if (ctx.schemes.empty()) throw_config("missing artifacts: no distill_* results in " + run_dir.string());
  const SchemeRun& s = options.scheme ? ctx.scheme(*options.scheme) : ctx.schemes.back();
  const std::uint64_t seed = options.seed.value_or(s.config.seeds.front());
  const double tau = s.config.student.distill.tau;
  const fs::path tdir = layout::teacher_dir(run_dir);

  const auto hz = row_entropies(load_logits(layout::checkpoint(tdir, seed), ctx.ds), tau);
  const auto hh = row_entropies(load_logits(layout::checkpoint(s.dir, seed), ctx.ds), tau);
  std::vector<double> rho;
  if (options.invariant) {
    const ModelFile mf = load_model(layout::model(tdir, seed));
    if (mf.kind != ModelKind::Gcn) throw_config("teacher model file is not a GCN");
    rho = invariant_entropy(GcnModel(mf.stack), normalize_adjacency(ctx.ds.graph), ctx.ds.features,
                            ctx.teacher_config.invariant, tau);
  }
  std::string out = options.invariant ? "node_id,teacher_entropy,student_entropy,invariant_entropy\n"
                                      : "node_id,teacher_entropy,student_entropy\n";
  for (NodeId i = 0; i < ctx.ds.num_nodes(); ++i) {
    out += std::to_string(i) + "," + fmt_double(hz[i]) + "," + fmt_double(hh[i]);
    if (options.invariant) out += "," + fmt_double(rho[i]);
    out += "\n";
  }
  return out;
}

}  // namespace hgmd
