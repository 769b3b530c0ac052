#include "grembed/core/artifact_io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "grembed/core/validate.hpp"

namespace grembed {

ArtifactError::ArtifactError(Kind kind, const std::string& message, std::optional<std::size_t> offset)
    : std::runtime_error(offset ? message + " (at byte " + std::to_string(*offset) + ")" : message),
      kind_(kind),
      offset_(offset) {}

const char* to_string(ArtifactError::Kind kind) {
  switch (kind) {
    case ArtifactError::Kind::kNotFound: return "not found";
    case ArtifactError::Kind::kIo: return "i/o error";
    case ArtifactError::Kind::kBadMagic: return "bad magic";
    case ArtifactError::Kind::kVersionMismatch: return "version mismatch";
    case ArtifactError::Kind::kWrongType: return "wrong artifact type";
    case ArtifactError::Kind::kTruncated: return "truncated payload";
    case ArtifactError::Kind::kMalformed: return "malformed";
    case ArtifactError::Kind::kInvariant: return "invariant failure";
  }
  return "unknown";
}

namespace {

constexpr char kMagic[4] = {'G', 'F', 'G', '1'};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void header(ArtifactTag tag, std::uint64_t config_hash) {
    buf_.append(kMagic, 4);
    u16(kFormatVersion);
    u8(static_cast<std::uint8_t>(tag));
    u64(config_hash);
  }
  void matrix(const Matrix& m) {
    u64(m.rows());
    u64(m.cols());
    for (double v : m.data()) f64(v);
  }
  void sparse(const SparseMatrix& s) {
    u64(s.rows());
    u64(s.cols());
    u64(s.nnz());
    for (const auto& t : s.triplets()) {
      u64(t.row);
      u64(t.col);
      f64(t.value);
    }
  }
  std::string take() { return std::move(buf_); }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::uint64_t header(ArtifactTag expected) {
    if (bytes_.size() < 4 || std::memcmp(bytes_.data(), kMagic, 4) != 0) {
      throw ArtifactError(ArtifactError::Kind::kBadMagic, "bad magic", 0);
    }
    pos_ = 4;
    const std::size_t version_at = pos_;
    const std::uint16_t version = u16();
    if (version != kFormatVersion) {
      throw ArtifactError(ArtifactError::Kind::kVersionMismatch,
                          "format version " + std::to_string(version) + ", expected " + std::to_string(kFormatVersion),
                          version_at);
    }
    const std::size_t tag_at = pos_;
    const std::uint8_t tag = u8();
    if (tag != static_cast<std::uint8_t>(expected)) {
      throw ArtifactError(ArtifactError::Kind::kWrongType,
                          "artifact tag " + std::to_string(tag) + ", expected " +
                              std::to_string(static_cast<int>(expected)),
                          tag_at);
    }
    return u64();
  }

  /// Reads a count whose payload needs `unit` bytes per element.
  std::size_t count(std::size_t unit) {
    const std::size_t at = pos_;
    const std::uint64_t n = u64();
    if (unit > 0 && n > remaining() / unit) {
      throw ArtifactError(ArtifactError::Kind::kTruncated,
                          "count " + std::to_string(n) + " exceeds remaining payload", at);
    }
    return static_cast<std::size_t>(n);
  }

  Matrix matrix() {
    const std::size_t rows = count(0);
    const std::size_t at = pos_;
    const std::uint64_t cols = u64();
    if (rows != 0 && cols > remaining() / 8 / rows) {
      throw ArtifactError(ArtifactError::Kind::kTruncated, "matrix payload shorter than its shape", at);
    }
    Matrix m(rows, static_cast<std::size_t>(cols));
    for (double& v : m.data()) v = f64();
    return m;
  }

  SparseMatrix sparse() {
    const std::size_t rows = count(0);
    const std::size_t cols = count(0);
    const std::size_t at = pos_;
    const std::size_t nnz = count(24);
    std::vector<Triplet> ts(nnz);
    for (auto& t : ts) {
      t.row = u64();
      t.col = u64();
      t.value = f64();
      if (t.row >= rows || t.col >= cols) {
        throw ArtifactError(ArtifactError::Kind::kInvariant, "sparse entry outside shape", at);
      }
    }
    return SparseMatrix::from_triplets(rows, cols, std::move(ts));
  }

  void finish() const {
    if (pos_ != bytes_.size()) {
      throw ArtifactError(ArtifactError::Kind::kMalformed, "trailing bytes after payload", pos_);
    }
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw ArtifactError(ArtifactError::Kind::kTruncated,
                          "needed " + std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left", pos_);
    }
  }
  std::uint64_t le(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void throw_if_invalid(const std::vector<std::string>& problems, const char* what) {
  if (!problems.empty()) {
    throw ArtifactError(ArtifactError::Kind::kInvariant, std::string(what) + ": " + problems.front());
  }
}

// ---- Arsrg text helpers ----

std::string fmt9(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool next() {
    if (pos_ >= text_.size()) return false;
    line_start_ = pos_;
    auto nl = text_.find('\n', pos_);
    if (nl == std::string_view::npos) nl = text_.size();
    line_ = text_.substr(pos_, nl - pos_);
    if (!line_.empty() && line_.back() == '\r') line_.remove_suffix(1);
    pos_ = nl + 1;
    ++line_no_;
    tokens_.clear();
    std::size_t p = 0;
    while (p < line_.size()) {
      while (p < line_.size() && line_[p] == ' ') ++p;
      if (p >= line_.size()) break;
      auto e = line_.find(' ', p);
      if (e == std::string_view::npos) e = line_.size();
      tokens_.push_back(line_.substr(p, e - p));
      p = e;
    }
    return true;
  }

  /// Requires another line; otherwise the file is truncated.
  void require(std::string_view what) {
    if (!next()) {
      throw ArtifactError(ArtifactError::Kind::kTruncated, "expected " + std::string(what) + " record", text_.size());
    }
  }

  std::string_view line() const { return line_; }
  const std::vector<std::string_view>& tokens() const { return tokens_; }
  std::size_t line_start() const { return line_start_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ArtifactError(ArtifactError::Kind::kMalformed, "line " + std::to_string(line_no_) + ": " + msg, line_start_);
  }

  void expect_keyword(std::string_view kw, std::size_t n_tokens) const {
    if (tokens_.empty() || tokens_[0] != kw) fail("expected '" + std::string(kw) + "' record");
    if (n_tokens != 0 && tokens_.size() != n_tokens) {
      fail("'" + std::string(kw) + "' record has " + std::to_string(tokens_.size()) + " fields, expected " +
           std::to_string(n_tokens));
    }
  }

  template <typename T>
  T num(std::size_t i) const {
    if (i >= tokens_.size()) fail("missing field " + std::to_string(i));
    T out{};
    const auto tok = tokens_[i];
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("cannot parse '" + std::string(tok) + "'");
    return out;
  }

 private:
  std::string_view text_;
  std::string_view line_;
  std::vector<std::string_view> tokens_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
  std::size_t line_no_ = 0;
};

}  // namespace

std::string encode_artifact(const DistanceMatrix& dm, std::uint64_t config_hash) {
  ByteWriter w;
  w.header(ArtifactTag::kDistanceMatrix, config_hash);
  w.u64(dm.names.size());
  for (const auto& name : dm.names) w.str(name);
  w.matrix(dm.values);
  return w.take();
}

std::string encode_artifact(const Matrix& m, std::uint64_t config_hash) {
  ByteWriter w;
  w.header(ArtifactTag::kMatrix, config_hash);
  w.matrix(m);
  return w.take();
}

std::string encode_artifact(const DatasetGraph& g, std::uint64_t config_hash) {
  ByteWriter w;
  w.header(ArtifactTag::kDatasetGraph, config_hash);
  w.u64(g.n_nodes);
  w.u64(g.num_classes);
  w.sparse(g.adjacency);
  w.sparse(g.normalized);
  w.matrix(g.features);
  for (int y : g.labels) w.i64(y);
  for (Split s : g.split) w.u8(static_cast<std::uint8_t>(s));
  w.u64(g.stats.node_count);
  w.u64(g.stats.edge_count);
  w.f64(g.stats.density);
  w.u64(g.stats.class_histogram.size());
  for (auto c : g.stats.class_histogram) w.u64(c);
  return w.take();
}

std::string encode_artifact(const GcnModel& model, std::uint64_t config_hash) {
  ByteWriter w;
  w.header(ArtifactTag::kGcnModel, config_hash);
  w.u64(model.weights.size());
  for (auto d : model.layer_dims) w.u64(d);
  for (auto a : model.activations) w.u8(static_cast<std::uint8_t>(a));
  for (const auto& m : model.weights) w.matrix(m);
  return w.take();
}

std::string encode_artifact(const Arsrg& g, std::uint64_t config_hash) {
  std::ostringstream os;
  os << "ARSRG " << kArsrgTextVersion << '\n';
  os << "config_hash " << hash_hex(config_hash) << '\n';
  os << "image_id " << g.image_id << '\n';
  os << "label " << (g.label ? std::to_string(*g.label) : std::string("none")) << '\n';
  os << "size " << g.image_width << ' ' << g.image_height << '\n';
  os << "descriptor_dim " << g.descriptor_dim << '\n';
  os << "counts " << g.regions.size() << ' ' << g.region_edges.size() << ' ' << g.descriptors.size() << '\n';
  for (const Region& r : g.regions) {
    os << "region " << r.id << ' ' << r.pixel_count << ' ' << fmt9(r.centroid_x) << ' ' << fmt9(r.centroid_y);
    for (float c : r.mean_color) os << ' ' << fmt9(c);
    os << ' ' << r.descriptor_ids.size();
    for (int d : r.descriptor_ids) os << ' ' << d;
    os << '\n';
  }
  for (const auto& [a, b] : g.region_edges) os << "edge " << a << ' ' << b << '\n';
  for (const Descriptor& d : g.descriptors) {
    os << "desc " << fmt9(d.x) << ' ' << fmt9(d.y) << ' ' << fmt9(d.scale) << ' ' << fmt9(d.orientation);
    for (float v : d.vector) os << ' ' << fmt9(v);
    os << '\n';
  }
  return os.str();
}

template <>
Stamped<DistanceMatrix> decode_artifact<DistanceMatrix>(std::string_view bytes) {
  ByteReader r(bytes);
  Stamped<DistanceMatrix> out;
  out.config_hash = r.header(ArtifactTag::kDistanceMatrix);
  const std::size_t n = r.count(4);
  out.value.names.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.value.names.push_back(r.str());
  out.value.values = r.matrix();
  r.finish();
  throw_if_invalid(validate_distance_matrix(out.value), "distance matrix");
  return out;
}

template <>
Stamped<Matrix> decode_artifact<Matrix>(std::string_view bytes) {
  ByteReader r(bytes);
  Stamped<Matrix> out;
  out.config_hash = r.header(ArtifactTag::kMatrix);
  out.value = r.matrix();
  r.finish();
  if (!all_finite(out.value)) throw ArtifactError(ArtifactError::Kind::kInvariant, "matrix has non-finite entries");
  return out;
}

template <>
Stamped<DatasetGraph> decode_artifact<DatasetGraph>(std::string_view bytes) {
  ByteReader r(bytes);
  Stamped<DatasetGraph> out;
  DatasetGraph& g = out.value;
  out.config_hash = r.header(ArtifactTag::kDatasetGraph);
  g.n_nodes = r.count(9);
  g.num_classes = r.count(0);
  g.adjacency = r.sparse();
  g.normalized = r.sparse();
  g.features = r.matrix();
  g.labels.resize(g.n_nodes);
  for (int& y : g.labels) y = static_cast<int>(r.i64());
  g.split.resize(g.n_nodes);
  for (Split& s : g.split) s = static_cast<Split>(r.u8());
  g.stats.node_count = r.u64();
  g.stats.edge_count = r.u64();
  g.stats.density = r.f64();
  g.stats.class_histogram.resize(r.count(8));
  for (auto& c : g.stats.class_histogram) c = r.u64();
  r.finish();
  throw_if_invalid(validate_dataset_graph(g), "dataset graph");
  return out;
}

template <>
Stamped<GcnModel> decode_artifact<GcnModel>(std::string_view bytes) {
  ByteReader r(bytes);
  Stamped<GcnModel> out;
  GcnModel& m = out.value;
  out.config_hash = r.header(ArtifactTag::kGcnModel);
  const std::size_t layers = r.count(17);
  m.layer_dims.resize(layers + 1);
  for (auto& d : m.layer_dims) d = r.u64();
  m.activations.resize(layers);
  for (auto& a : m.activations) {
    const std::size_t at = r.offset();
    const auto v = r.u8();
    if (v > 1) throw ArtifactError(ArtifactError::Kind::kMalformed, "unknown activation tag", at);
    a = static_cast<Activation>(v);
  }
  m.weights.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) m.weights.push_back(r.matrix());
  r.finish();
  throw_if_invalid(validate_model(m), "model");
  return out;
}

template <>
Stamped<Arsrg> decode_artifact<Arsrg>(std::string_view bytes) {
  LineReader in(bytes);
  Stamped<Arsrg> out;
  Arsrg& g = out.value;

  if (!in.next() || in.tokens().empty() || in.tokens()[0] != "ARSRG") {
    throw ArtifactError(ArtifactError::Kind::kBadMagic, "bad magic: expected 'ARSRG' header", 0);
  }
  if (in.tokens().size() != 2 || in.num<int>(1) != kArsrgTextVersion) {
    throw ArtifactError(ArtifactError::Kind::kVersionMismatch, "unsupported ARSRG text version", 0);
  }
  in.require("config_hash");
  in.expect_keyword("config_hash", 2);
  {
    const auto tok = in.tokens()[1];
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out.config_hash, 16);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) in.fail("bad config hash");
  }
  in.require("image_id");
  if (in.line().substr(0, 9) != "image_id ") in.fail("expected 'image_id' record");
  g.image_id = std::string(in.line().substr(9));
  in.require("label");
  in.expect_keyword("label", 2);
  if (in.tokens()[1] == "none") {
    g.label.reset();
  } else {
    g.label = in.num<int>(1);
  }
  in.require("size");
  in.expect_keyword("size", 3);
  g.image_width = in.num<int>(1);
  g.image_height = in.num<int>(2);
  in.require("descriptor_dim");
  in.expect_keyword("descriptor_dim", 2);
  g.descriptor_dim = in.num<int>(1);
  in.require("counts");
  in.expect_keyword("counts", 4);
  const auto n_regions = in.num<std::size_t>(1);
  const auto n_edges = in.num<std::size_t>(2);
  const auto n_desc = in.num<std::size_t>(3);
  // Every record needs at least a few bytes; reject absurd counts before allocating.
  if (n_regions + n_edges + n_desc > bytes.size()) {
    throw ArtifactError(ArtifactError::Kind::kTruncated, "record counts exceed file size", in.line_start());
  }

  g.regions.resize(n_regions);
  for (auto& r : g.regions) {
    in.require("region");
    in.expect_keyword("region", 0);
    if (in.tokens().size() < 9) in.fail("region record too short");
    r.id = in.num<int>(1);
    r.pixel_count = in.num<std::int64_t>(2);
    r.centroid_x = in.num<float>(3);
    r.centroid_y = in.num<float>(4);
    for (std::size_t c = 0; c < 3; ++c) r.mean_color[c] = in.num<float>(5 + c);
    const auto k = in.num<std::size_t>(8);
    if (in.tokens().size() != 9 + k) in.fail("region descriptor list length mismatch");
    r.descriptor_ids.resize(k);
    for (std::size_t i = 0; i < k; ++i) r.descriptor_ids[i] = in.num<int>(9 + i);
  }
  g.region_edges.resize(n_edges);
  for (auto& e : g.region_edges) {
    in.require("edge");
    in.expect_keyword("edge", 3);
    e = {in.num<int>(1), in.num<int>(2)};
  }
  const auto dim = static_cast<std::size_t>(std::max(g.descriptor_dim, 0));
  g.descriptors.resize(n_desc);
  for (auto& d : g.descriptors) {
    in.require("desc");
    in.expect_keyword("desc", 5 + dim);
    d.x = in.num<float>(1);
    d.y = in.num<float>(2);
    d.scale = in.num<float>(3);
    d.orientation = in.num<float>(4);
    d.vector.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) d.vector[i] = in.num<float>(5 + i);
  }
  if (in.next() && !in.line().empty()) in.fail("unexpected trailing record");
  throw_if_invalid(validate_arsrg(g), "arsrg");
  return out;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError(ArtifactError::Kind::kNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError(ArtifactError::Kind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArtifactError(ArtifactError::Kind::kIo, "write failed for " + path.string());
}

namespace {
std::vector<std::string> validate_any(const DistanceMatrix& v) { return validate_distance_matrix(v); }
std::vector<std::string> validate_any(const DatasetGraph& v) { return validate_dataset_graph(v); }
std::vector<std::string> validate_any(const GcnModel& v) { return validate_model(v); }
std::vector<std::string> validate_any(const Arsrg& v) { return validate_arsrg(v); }
std::vector<std::string> validate_any(const Matrix& v) {
  if (all_finite(v)) return {};
  return {"matrix has non-finite entries"};
}
}  // namespace

template <typename T>
void write_artifact(const std::filesystem::path& path, const T& value, std::uint64_t config_hash) {
  throw_if_invalid(validate_any(value), "refusing to write invalid artifact");
  write_file_bytes(path, encode_artifact(value, config_hash));
}

template void write_artifact<DistanceMatrix>(const std::filesystem::path&, const DistanceMatrix&, std::uint64_t);
template void write_artifact<Matrix>(const std::filesystem::path&, const Matrix&, std::uint64_t);
template void write_artifact<DatasetGraph>(const std::filesystem::path&, const DatasetGraph&, std::uint64_t);
template void write_artifact<GcnModel>(const std::filesystem::path&, const GcnModel&, std::uint64_t);
template void write_artifact<Arsrg>(const std::filesystem::path&, const Arsrg&, std::uint64_t);

}  // namespace grembed
