#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "hgmd/error.hpp"
#include "hgmd/graph.hpp"

namespace hgmd {
namespace fs = std::filesystem;

namespace {

constexpr char kFeatureMagic[8] = {'H', 'G', 'M', 'D', 'F', 'E', 'A', 'T'};

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are unsupported");

[[noreturn]] void fail_at(const fs::path& file, std::size_t line, const std::string& what) {
  throw_config(file.filename().string() + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_or_fail(const fs::path& file, std::ios::openmode mode = std::ios::in) {
  if (!fs::exists(file)) throw_config("missing file " + file.string());
  std::ifstream in(file, mode);
  if (!in) throw_config("cannot open " + file.string());
  return in;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Parses whitespace-separated unsigned integers from one line.
std::vector<std::uint64_t> parse_uints(std::string_view line, const fs::path& file, std::size_t lineno) {
  std::vector<std::uint64_t> out;
  line = trim(line);
  while (!line.empty()) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr == line.data()) fail_at(file, lineno, "expected a non-negative integer");
    out.push_back(v);
    line.remove_prefix(static_cast<std::size_t>(ptr - line.data()));
    if (!line.empty() && line.front() != ' ' && line.front() != '\t') {
      fail_at(file, lineno, "unexpected character '" + std::string(1, line.front()) + "'");
    }
    line = trim(line);
  }
  return out;
}

template <class Fn>
void for_each_line(const fs::path& file, Fn&& fn) {
  auto in = open_or_fail(file);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    fn(std::string_view(line), lineno);
  }
}

DenseMatrix read_features(const fs::path& file) {
  auto in = open_or_fail(file, std::ios::binary);
  char header[16];
  if (!in.read(header, sizeof header)) fail_at(file, 0, "truncated header");
  if (std::memcmp(header, kFeatureMagic, 8) != 0) fail_at(file, 0, "bad magic (expected HGMDFEAT)");
  std::uint32_t n = 0;
  std::uint32_t d = 0;
  std::memcpy(&n, header + 8, 4);
  std::memcpy(&d, header + 12, 4);

  DenseMatrix x(n, d);
  std::vector<float> row(d);
  for (std::uint32_t r = 0; r < n; ++r) {
    if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(d * sizeof(float)))) {
      fail_at(file, r, "truncated at feature row " + std::to_string(r));
    }
    for (std::uint32_t c = 0; c < d; ++c) {
      if (!std::isfinite(row[c])) {
        fail_at(file, r, "non-finite feature at row " + std::to_string(r) + " col " + std::to_string(c));
      }
      x(r, c) = static_cast<double>(row[c]);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) fail_at(file, n, "trailing bytes after feature matrix");
  return x;
}

std::vector<NodeId> read_split(const fs::path& file, NodeId n) {
  std::vector<std::pair<NodeId, std::size_t>> entries;
  for_each_line(file, [&](std::string_view line, std::size_t lineno) {
    const auto v = parse_uints(line, file, lineno);
    if (v.size() != 1) fail_at(file, lineno, "expected one node index per line");
    if (v[0] >= n) fail_at(file, lineno, "index out of range: " + std::to_string(v[0]));
    entries.emplace_back(static_cast<NodeId>(v[0]), lineno);
  });
  std::sort(entries.begin(), entries.end());
  std::vector<NodeId> out;
  out.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (k > 0 && entries[k].first == entries[k - 1].first) {
      fail_at(file, entries[k].second, "duplicate index " + std::to_string(entries[k].first));
    }
    out.push_back(entries[k].first);
  }
  return out;
}

void check_disjoint(const std::vector<NodeId>& a, const std::vector<NodeId>& b, const fs::path& b_file) {
  std::vector<NodeId> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  if (common.empty()) return;
  // Report the line in b_file where the first overlapping index appears.
  std::size_t line_of_overlap = 0;
  for_each_line(b_file, [&](std::string_view line, std::size_t lineno) {
    if (line_of_overlap == 0 && parse_uints(line, b_file, lineno).at(0) == common.front()) {
      line_of_overlap = lineno;
    }
  });
  fail_at(b_file, line_of_overlap, "overlapping splits: node " + std::to_string(common.front()));
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
    throw_io("cannot write " + file.string());
  }
}

std::string index_lines(const std::vector<NodeId>& idx) {
  std::string s;
  for (NodeId v : idx) s += std::to_string(v) + '\n';
  return s;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw_config("dataset directory not found: " + dir.string());

  Dataset ds;

  const auto meta_file = dir / "meta.json";
  {
    auto in = open_or_fail(meta_file);
    nlohmann::json meta;
    try {
      in >> meta;
    } catch (const nlohmann::json::exception& e) {
      fail_at(meta_file, 1, std::string("malformed JSON: ") + e.what());
    }
    if (!meta.contains("num_classes") || !meta["num_classes"].is_number_unsigned()) {
      fail_at(meta_file, 1, "num_classes must be a non-negative integer");
    }
    ds.labels.num_classes = meta["num_classes"].get<ClassId>();
    ds.name = meta.value("name", std::string{});
    if (ds.labels.num_classes < 2) fail_at(meta_file, 1, "num_classes must be >= 2");
  }

  ds.features = read_features(dir / "features.bin");
  const auto n = static_cast<NodeId>(ds.features.rows());

  const auto edges_file = dir / "edges.txt";
  std::vector<std::pair<NodeId, NodeId>> edges;
  for_each_line(edges_file, [&](std::string_view line, std::size_t lineno) {
    const auto v = parse_uints(line, edges_file, lineno);
    if (v.size() != 2) fail_at(edges_file, lineno, "expected \"src dst\"");
    if (v[0] >= n || v[1] >= n) {
      fail_at(edges_file, lineno, "index out of range (N=" + std::to_string(n) + ")");
    }
    edges.emplace_back(static_cast<NodeId>(v[0]), static_cast<NodeId>(v[1]));
  });
  ds.graph = Graph::from_edges(n, edges, &ds.duplicate_edges);

  const auto labels_file = dir / "labels.txt";
  for_each_line(labels_file, [&](std::string_view line, std::size_t lineno) {
    const auto v = parse_uints(line, labels_file, lineno);
    if (v.size() != 1) fail_at(labels_file, lineno, "expected one class id per line");
    if (v[0] >= ds.labels.num_classes) {
      fail_at(labels_file, lineno, "label out of range: " + std::to_string(v[0]));
    }
    ds.labels.y.push_back(static_cast<ClassId>(v[0]));
  });
  if (ds.labels.y.size() != n) {
    fail_at(labels_file, ds.labels.y.size(),
            "expected " + std::to_string(n) + " labels, found " + std::to_string(ds.labels.y.size()));
  }

  const auto train_file = dir / "split_train.txt";
  const auto val_file = dir / "split_val.txt";
  const auto test_file = dir / "split_test.txt";
  ds.splits.train = read_split(train_file, n);
  ds.splits.val = read_split(val_file, n);
  ds.splits.test = read_split(test_file, n);
  if (ds.splits.train.empty()) fail_at(train_file, 0, "train split is empty");
  check_disjoint(ds.splits.train, ds.splits.val, val_file);
  check_disjoint(ds.splits.train, ds.splits.test, test_file);
  check_disjoint(ds.splits.val, ds.splits.test, test_file);

  return ds;
}

void validate_dataset(const Dataset& ds) {
  const auto n = ds.graph.num_nodes();
  if (ds.features.rows() != n) throw_config("feature rows != number of nodes");
  if (!ds.features.all_finite()) throw_config("non-finite feature value");
  if (ds.labels.num_classes < 2) throw_config("num_classes must be >= 2");
  if (ds.labels.y.size() != n) throw_config("label count != number of nodes");
  for (ClassId y : ds.labels.y) {
    if (y >= ds.labels.num_classes) throw_config("label out of range: " + std::to_string(y));
  }
  const auto check_split = [&](const std::vector<NodeId>& s, const char* name) {
    if (!std::is_sorted(s.begin(), s.end()) || std::adjacent_find(s.begin(), s.end()) != s.end()) {
      throw_config(std::string(name) + " split must be sorted and unique");
    }
    if (!s.empty() && s.back() >= n) throw_config(std::string(name) + " split index out of range");
  };
  check_split(ds.splits.train, "train");
  check_split(ds.splits.val, "val");
  check_split(ds.splits.test, "test");
  if (ds.splits.train.empty()) throw_config("train split is empty");
  const auto overlaps = [](const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
    std::vector<NodeId> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    return !common.empty();
  };
  if (overlaps(ds.splits.train, ds.splits.val) || overlaps(ds.splits.train, ds.splits.test) ||
      overlaps(ds.splits.val, ds.splits.test)) {
    throw_config("overlapping splits");
  }
}

void write_dataset(const Dataset& ds, const fs::path& dir) {
  validate_dataset(ds);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_io("cannot create " + dir.string() + ": " + ec.message());

  {
    std::string s;
    const auto& g = ds.graph;
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      for (NodeId v : g.neighbors(u)) {
        if (u < v) s += std::to_string(u) + ' ' + std::to_string(v) + '\n';
      }
    }
    write_text(dir / "edges.txt", s);
  }

  {
    std::string bytes(kFeatureMagic, 8);
    const auto n = static_cast<std::uint32_t>(ds.features.rows());
    const auto d = static_cast<std::uint32_t>(ds.features.cols());
    bytes.append(reinterpret_cast<const char*>(&n), 4);
    bytes.append(reinterpret_cast<const char*>(&d), 4);
    bytes.reserve(bytes.size() + ds.features.size() * sizeof(float));
    for (double v : ds.features.values()) {
      const float f = static_cast<float>(v);
      bytes.append(reinterpret_cast<const char*>(&f), sizeof f);
    }
    write_text(dir / "features.bin", bytes);
  }

  {
    std::string s;
    for (ClassId y : ds.labels.y) s += std::to_string(y) + '\n';
    write_text(dir / "labels.txt", s);
  }

  write_text(dir / "split_train.txt", index_lines(ds.splits.train));
  write_text(dir / "split_val.txt", index_lines(ds.splits.val));
  write_text(dir / "split_test.txt", index_lines(ds.splits.test));

  nlohmann::json meta = {{"num_classes", ds.labels.num_classes}, {"name", ds.name}};
  write_text(dir / "meta.json", meta.dump(2) + '\n');
}

}  // namespace hgmd
