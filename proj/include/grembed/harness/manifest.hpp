#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "grembed/core/types.hpp"

namespace grembed {

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestEntry {
  std::string path;  // as written; relative paths resolve against Manifest::base_dir
  std::string class_name;
  std::optional<Split> split;  // absent before a protocol assigns one
};

struct Manifest {
  std::string dataset;
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  /// Class names in order of first appearance; the label of a class is its index here.
  std::vector<std::string> class_names() const;
  std::vector<int> labels() const;
  std::filesystem::path resolve(const ManifestEntry& e) const;
};

/// `path<TAB>class[<TAB>train|test]` per line. `# dataset: name` sets the
/// dataset; other '#' lines and blank lines are skipped.
Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {});
Manifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const Manifest& m);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

/// Broken invariants for a manifest about to drive a run: unique paths, a
/// split on every entry, non-empty train and test sets, every class in train.
std::vector<std::string> validate_manifest(const Manifest& m);

/// Keeps the first `n` classes by appearance.
Manifest limit_classes(const Manifest& m, std::size_t n);

/// Directory loaders. Entries come back sorted by path with no split.
/// `folders`: one subdirectory per class, images anywhere below it.
Manifest scan_class_folders(const std::filesystem::path& root, std::string dataset);
/// Flat directory of `objN__V.png` files, class `objN`.
Manifest scan_coil_directory(const std::filesystem::path& root);
/// `category/object/view.png`; mask files (`-map`) are skipped.
Manifest scan_eth_directory(const std::filesystem::path& root);

}  // namespace grembed
