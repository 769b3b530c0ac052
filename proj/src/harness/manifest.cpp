#include "grembed/harness/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "grembed/core/artifact_io.hpp"

namespace fs = std::filesystem;

namespace grembed {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".ppm";
}

std::vector<fs::path> images_below(const fs::path& root) {
  if (!fs::is_directory(root)) throw ManifestError("not a directory: " + root.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && is_image(e.path())) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<std::string> Manifest::class_names() const {
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (seen.insert(e.class_name).second) names.push_back(e.class_name);
  }
  return names;
}

std::vector<int> Manifest::labels() const {
  std::map<std::string, int> index;
  std::vector<int> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    auto [it, inserted] = index.emplace(e.class_name, static_cast<int>(index.size()));
    out.push_back(it->second);
  }
  return out;
}

fs::path Manifest::resolve(const ManifestEntry& e) const {
  const fs::path p(e.path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

Manifest parse_manifest(std::string_view text, const fs::path& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    if (trim(line).front() == '#') {
      std::string_view body = trim(trim(line).substr(1));
      if (body.starts_with("dataset:")) m.dataset = std::string(trim(body.substr(8)));
      continue;
    }
    const auto cols = split_tabs(line);
    const std::string where = "manifest line " + std::to_string(line_no) + ": ";
    if (cols.size() < 2 || cols.size() > 3) {
      throw ManifestError(where + "expected path<TAB>class[<TAB>split], got " + std::to_string(cols.size()) +
                          " column(s)");
    }
    ManifestEntry e;
    e.path = std::string(trim(cols[0]));
    e.class_name = std::string(trim(cols[1]));
    if (e.path.empty() || e.class_name.empty()) throw ManifestError(where + "empty path or class");
    if (cols.size() == 3) {
      const std::string_view s = trim(cols[2]);
      if (s == "train") {
        e.split = Split::kTrain;
      } else if (s == "test") {
        e.split = Split::kTest;
      } else if (!s.empty()) {
        throw ManifestError(where + "split must be train or test, got '" + std::string(s) + "'");
      }
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw ArtifactError(ArtifactError::Kind::kNotFound, "manifest not found: " + path.string());
  return parse_manifest(read_file_bytes(path), path.parent_path());
}

std::string format_manifest(const Manifest& m) {
  std::ostringstream out;
  if (!m.dataset.empty()) out << "# dataset: " << m.dataset << '\n';
  for (const auto& e : m.entries) {
    out << e.path << '\t' << e.class_name;
    if (e.split) out << '\t' << (*e.split == Split::kTrain ? "train" : "test");
    out << '\n';
  }
  return out.str();
}

void write_manifest(const fs::path& path, const Manifest& m) { write_file_bytes(path, format_manifest(m)); }

std::vector<std::string> validate_manifest(const Manifest& m) {
  std::vector<std::string> errors;
  if (m.entries.empty()) {
    errors.emplace_back("manifest has no entries");
    return errors;
  }
  std::set<std::string> paths;
  std::set<std::string> train_classes;
  std::size_t train = 0;
  std::size_t test = 0;
  for (const auto& e : m.entries) {
    if (!paths.insert(e.path).second) errors.push_back("duplicate path " + e.path);
    if (!e.split) {
      errors.push_back("no split for " + e.path);
    } else if (*e.split == Split::kTrain) {
      ++train;
      train_classes.insert(e.class_name);
    } else {
      ++test;
    }
  }
  if (train == 0) errors.emplace_back("train split is empty");
  if (test == 0) errors.emplace_back("test split is empty");
  for (const auto& c : m.class_names()) {
    if (!train_classes.contains(c)) errors.push_back("class " + c + " has no training image");
  }
  return errors;
}

Manifest limit_classes(const Manifest& m, std::size_t n) {
  const auto names = m.class_names();
  const std::set<std::string> keep(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(std::min(n, names.size())));
  Manifest out{m.dataset, {}, m.base_dir};
  for (const auto& e : m.entries) {
    if (keep.contains(e.class_name)) out.entries.push_back(e);
  }
  return out;
}

Manifest scan_class_folders(const fs::path& root, std::string dataset) {
  Manifest m{std::move(dataset), {}, root};
  for (const auto& rel : images_below(root)) {
    if (std::distance(rel.begin(), rel.end()) < 2) continue;  // loose files at the root have no class
    m.entries.push_back({rel.generic_string(), rel.begin()->string(), std::nullopt});
  }
  return m;
}

Manifest scan_coil_directory(const fs::path& root) {
  static const std::regex kName(R"((obj\d+)__\d+\.(png|ppm))", std::regex::icase);
  Manifest m{"coil100", {}, root};
  for (const auto& rel : images_below(root)) {
    std::smatch match;
    const std::string name = rel.filename().string();
    if (std::regex_match(name, match, kName)) m.entries.push_back({rel.generic_string(), match[1].str(), std::nullopt});
  }
  return m;
}

Manifest scan_eth_directory(const fs::path& root) {
  Manifest m{"eth80", {}, root};
  for (const auto& rel : images_below(root)) {
    if (std::distance(rel.begin(), rel.end()) != 3) continue;
    if (rel.filename().string().find("-map") != std::string::npos) continue;
    m.entries.push_back({rel.generic_string(), rel.begin()->string(), std::nullopt});
  }
  return m;
}

}  // namespace grembed
