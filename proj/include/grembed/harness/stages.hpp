#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "grembed/core/run_config.hpp"
#include "grembed/harness/evaluate.hpp"
#include "grembed/harness/manifest.hpp"

namespace grembed {

enum class Stage { kExtract, kMatch, kEmbed, kGraph, kTrain, kEval, kPipeline };

Stage parse_stage(std::string_view name);
const char* to_string(Stage stage);

/// Process exit statuses of the stage runner.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitMissingInput = 2,
  kExitHashMismatch = 3,
  kExitValidation = 4,
  kExitFailure = 5,
};

class StageError : public std::runtime_error {
 public:
  StageError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

struct StageContext {
  RunConfig config;
  std::optional<Manifest> manifest;
  std::filesystem::path out_dir;
  int workers = 1;
  EvalMode mode = EvalMode::kMulticlass;
  std::optional<std::filesystem::path> descriptor_dir;  // imported keypoints instead of extraction
  std::ostream* progress = nullptr;
};

/// One report block: `[stage]` followed by `key = value` lines.
struct StageReport {
  std::string stage;
  std::vector<std::pair<std::string, std::string>> values;

  void add(std::string key, std::string value) { values.emplace_back(std::move(key), std::move(value)); }
  /// Value of `key`, or empty.
  std::string get(std::string_view key) const;
};

/// Output layout under StageContext::out_dir.
namespace layout {
std::filesystem::path arsrg_dir(const std::filesystem::path& out);
std::filesystem::path arsrg_file(const std::filesystem::path& out, std::size_t index);
std::filesystem::path distances(const std::filesystem::path& out);
std::filesystem::path features(const std::filesystem::path& out);
std::filesystem::path dataset_graph(const std::filesystem::path& out);
std::filesystem::path model(const std::filesystem::path& out);
std::filesystem::path ova_model(const std::filesystem::path& out, std::size_t cls);
std::filesystem::path reports(const std::filesystem::path& out);
std::filesystem::path metrics(const std::filesystem::path& out, EvalMode mode);
std::filesystem::path confusion(const std::filesystem::path& out);
}  // namespace layout

/// Runs one stage (or the whole chain for kPipeline), appends its report
/// blocks to reports.txt and returns them. Failures throw StageError whose
/// code() is one of ExitCode.
std::vector<StageReport> run_stage(Stage stage, const StageContext& ctx);

}  // namespace grembed
