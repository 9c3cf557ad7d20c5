#include <cstring>
#include <fstream>
#include <iterator>

#include "hgmd/error.hpp"
#include "hgmd/models.hpp"

namespace hgmd {
namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kModelVersion = 1;

class Writer {
 public:
  template <class T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.append(p, sizeof(T));
  }
  void put_raw(const char* data, std::size_t n) { bytes_.append(data, n); }
  void put_doubles(std::span<const double> v) {
    put_raw(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  void put_json(const nlohmann::json& j) {
    const std::string s = j.dump();
    put(static_cast<std::uint32_t>(s.size()));
    put_raw(s.data(), s.size());
  }

  void save(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()))) {
      throw_io("cannot write " + path.string());
    }
  }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_config("cannot open " + path.string());
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw_config(path_.filename().string() + ": truncated while reading " + what + " at byte " +
                   std::to_string(pos_));
    }
  }
  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void get_doubles(std::span<double> out, const char* what) {
    need(out.size() * sizeof(double), what);
    std::memcpy(out.data(), bytes_.data() + pos_, out.size() * sizeof(double));
    pos_ += out.size() * sizeof(double);
  }
  void expect_magic(const char (&magic)[9]) {
    need(8, "magic");
    if (std::memcmp(bytes_.data(), magic, 8) != 0) {
      throw_config(path_.filename().string() + ": magic mismatch (expected " + std::string(magic, 8) + ")");
    }
    pos_ = 8;
  }
  nlohmann::json get_json() {
    const auto len = get<std::uint32_t>("json length");
    need(len, "json trailer");
    const std::string s(bytes_.data() + pos_, len);
    pos_ += len;
    try {
      return nlohmann::json::parse(s);
    } catch (const nlohmann::json::exception& e) {
      throw_config(path_.filename().string() + ": malformed json trailer: " + e.what());
    }
  }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw_config(path_.filename().string() + ": trailing bytes");
  }

 private:
  fs::path path_;
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const TeacherCheckpoint& ckpt, const fs::path& path) {
  if (!ckpt.logits.all_finite()) throw_numeric("refusing to save non-finite logits");
  Writer w;
  w.put_raw("HGMDCKPT", 8);
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(ckpt.logits.rows()));
  w.put(static_cast<std::uint32_t>(ckpt.logits.cols()));
  w.put(ckpt.val_acc);
  w.put_doubles(ckpt.logits.values());
  w.put_json(ckpt.config);
  w.save(path);
}

TeacherCheckpoint load_checkpoint(const fs::path& path) {
  Reader r(path);
  r.expect_magic("HGMDCKPT");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) throw_config(path.filename().string() + ": unsupported version " + std::to_string(version));
  const auto n = r.get<std::uint32_t>("N");
  const auto c = r.get<std::uint32_t>("C");
  TeacherCheckpoint ckpt;
  ckpt.val_acc = r.get<double>("val_acc");
  ckpt.logits = DenseMatrix(n, c);
  r.get_doubles(ckpt.logits.values(), "logits");
  ckpt.config = r.get_json();
  r.expect_end();
  if (!ckpt.logits.all_finite()) throw_config(path.filename().string() + ": non-finite logits");
  return ckpt;
}

void save_model(const ModelFile& model, const fs::path& path) {
  const LayerStack& s = model.stack;
  Writer w;
  w.put_raw("HGMDMODL", 8);
  w.put(kModelVersion);
  w.put(static_cast<std::uint32_t>(model.kind));
  w.put(static_cast<std::uint32_t>(s.num_layers()));
  w.put(s.dropout());
  for (std::size_t l = 0; l < s.num_layers(); ++l) {
    const auto& wv = s.weight(l).value;
    w.put(static_cast<std::uint32_t>(wv.rows()));
    w.put(static_cast<std::uint32_t>(wv.cols()));
    w.put_doubles(wv.values());
    w.put_doubles(s.bias(l).value.values());
  }
  w.put_json(model.config);
  w.save(path);
}

ModelFile load_model(const fs::path& path) {
  Reader r(path);
  r.expect_magic("HGMDMODL");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kModelVersion) throw_config(path.filename().string() + ": unsupported version " + std::to_string(version));
  ModelFile m;
  const auto kind = r.get<std::uint32_t>("kind");
  if (kind > 1) throw_config(path.filename().string() + ": unknown model kind " + std::to_string(kind));
  m.kind = static_cast<ModelKind>(kind);
  const auto layers = r.get<std::uint32_t>("layer count");
  const auto dropout = r.get<double>("dropout");
  std::vector<DenseMatrix> weights;
  std::vector<DenseMatrix> biases;
  for (std::uint32_t l = 0; l < layers; ++l) {
    const auto rows = r.get<std::uint32_t>("rows");
    const auto cols = r.get<std::uint32_t>("cols");
    DenseMatrix w(rows, cols);
    DenseMatrix b(1, cols);
    r.get_doubles(w.values(), "weights");
    r.get_doubles(b.values(), "bias");
    weights.push_back(std::move(w));
    biases.push_back(std::move(b));
  }
  m.config = r.get_json();
  r.expect_end();
  try {
    m.stack = LayerStack(std::move(weights), std::move(biases), dropout, m.kind == ModelKind::Gcn ? "gcn" : "mlp");
  } catch (const Error& e) {
    throw_config(path.filename().string() + ": " + e.what());
  }
  return m;
}

std::string file_magic(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_config("cannot open " + path.string());
  char buf[8] = {};
  in.read(buf, 8);
  return std::string(buf, static_cast<std::size_t>(in.gcount()));
}

}  // namespace hgmd
