#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace grembed {

enum class OptimizerKind { kGradientDescent, kAdam };
enum class SamplerKind { kImportance, kUniform };
enum class BudgetUnit { kEpochs, kSteps };
enum class PrototypeSet { kAll, kTrain };

/// Every threshold and hyperparameter of a run. Defaults equal the `aloi`
/// preset; `for_dataset` selects the others.
struct RunConfig {
  std::string dataset = "aloi";

  // image frontend
  int image_width = 150;
  int image_height = 150;
  double quantization_threshold = 300.0;  // [0, 600]
  double merge_threshold = 0.4;
  int descriptor_dim = 128;

  // matcher
  double ratio_threshold = 0.6;
  int min_region_matches = 3;

  // dataset graph
  double tau = 0.2;
  PrototypeSet prototypes = PrototypeSet::kAll;
  bool standardize_features = false;

  // FastGCN
  int epochs = 5000;
  BudgetUnit budget_unit = BudgetUnit::kEpochs;
  int hidden_size = 128;
  double learning_rate = 0.1;
  double l2 = 0.0;
  int batch_size = 256;
  double sample_size_fraction = 0.5;
  OptimizerKind optimizer = OptimizerKind::kGradientDescent;
  SamplerKind sampler = SamplerKind::kImportance;
  std::uint64_t seed = 1;

  /// Preset for "eth80", "coil100", "aloi" or "toy". Throws std::invalid_argument otherwise.
  static RunConfig for_dataset(std::string_view name);

  /// Applies one `key = value` setting; throws std::invalid_argument on unknown key or bad value.
  void set(std::string_view key, std::string_view value);

  /// Out-of-range settings, one message each.
  std::vector<std::string> validate() const;

  /// Canonical text form: every key in fixed order, reals printed round-trip exact.
  std::string to_text() const;

  /// 64-bit FNV-1a over `to_text()`.
  std::uint64_t hash() const;

  bool operator==(const RunConfig&) const = default;
};

/// Parses a flat key-value file. A `dataset` key selects the preset the other keys override.
RunConfig parse_run_config(std::string_view text);
RunConfig read_run_config(const std::filesystem::path& path);
void write_run_config(const std::filesystem::path& path, const RunConfig& config);

std::string hash_hex(std::uint64_t h);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace grembed
