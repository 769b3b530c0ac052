#include "grembed/core/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "grembed/core/artifact_io.hpp"

namespace grembed {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config key '" + std::string(key) + "': cannot parse '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key '" + std::string(key) + "': expected true/false");
}

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RunConfig RunConfig::for_dataset(std::string_view name) {
  RunConfig c;
  c.dataset = std::string(name);
  if (name == "eth80") {
    c.epochs = 30000;
    c.hidden_size = 256;
    c.batch_size = 1024;
    c.tau = 0.2;
  } else if (name == "coil100") {
    c.epochs = 10000;
    c.hidden_size = 512;
    c.batch_size = 1024;
    c.tau = 0.1;
  } else if (name == "aloi") {
    c.epochs = 5000;
    c.hidden_size = 128;
    c.batch_size = 256;
    c.tau = 0.2;
  } else if (name == "toy") {
    // Desk-scale synthetic set: 60 nodes, so fewer epochs and smaller batches.
    c.epochs = 300;
    c.hidden_size = 32;
    c.batch_size = 10;
    c.tau = 0.2;
  } else {
    throw std::invalid_argument("unknown dataset preset '" + std::string(name) + "'");
  }
  c.learning_rate = 0.1;
  c.l2 = 0.0;
  return c;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  if (key == "dataset") {
    *this = for_dataset(value);
  } else if (key == "image_width") {
    image_width = parse_number<int>(key, value);
  } else if (key == "image_height") {
    image_height = parse_number<int>(key, value);
  } else if (key == "quantization_threshold") {
    quantization_threshold = parse_number<double>(key, value);
  } else if (key == "merge_threshold") {
    merge_threshold = parse_number<double>(key, value);
  } else if (key == "descriptor_dim") {
    descriptor_dim = parse_number<int>(key, value);
  } else if (key == "ratio_threshold") {
    ratio_threshold = parse_number<double>(key, value);
  } else if (key == "min_region_matches") {
    min_region_matches = parse_number<int>(key, value);
  } else if (key == "tau") {
    tau = parse_number<double>(key, value);
  } else if (key == "prototypes") {
    if (value == "all") {
      prototypes = PrototypeSet::kAll;
    } else if (value == "train") {
      prototypes = PrototypeSet::kTrain;
    } else {
      throw std::invalid_argument("config key 'prototypes': expected all|train");
    }
  } else if (key == "standardize_features") {
    standardize_features = parse_bool(key, value);
  } else if (key == "epochs") {
    epochs = parse_number<int>(key, value);
  } else if (key == "budget_unit") {
    if (value == "epochs") {
      budget_unit = BudgetUnit::kEpochs;
    } else if (value == "steps") {
      budget_unit = BudgetUnit::kSteps;
    } else {
      throw std::invalid_argument("config key 'budget_unit': expected epochs|steps");
    }
  } else if (key == "hidden_size") {
    hidden_size = parse_number<int>(key, value);
  } else if (key == "learning_rate") {
    learning_rate = parse_number<double>(key, value);
  } else if (key == "l2") {
    l2 = parse_number<double>(key, value);
  } else if (key == "batch_size") {
    batch_size = parse_number<int>(key, value);
  } else if (key == "sample_size_fraction") {
    sample_size_fraction = parse_number<double>(key, value);
  } else if (key == "optimizer") {
    if (value == "sgd") {
      optimizer = OptimizerKind::kGradientDescent;
    } else if (value == "adam") {
      optimizer = OptimizerKind::kAdam;
    } else {
      throw std::invalid_argument("config key 'optimizer': expected sgd|adam");
    }
  } else if (key == "sampler") {
    if (value == "importance") {
      sampler = SamplerKind::kImportance;
    } else if (value == "uniform") {
      sampler = SamplerKind::kUniform;
    } else {
      throw std::invalid_argument("config key 'sampler': expected importance|uniform");
    }
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else {
    throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
  }
}

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> out;
  if (image_width <= 0 || image_height <= 0) out.emplace_back("image size must be positive");
  if (!(quantization_threshold >= 0.0 && quantization_threshold <= 600.0)) {
    out.emplace_back("quantization_threshold must lie in [0,600]");
  }
  if (!(merge_threshold >= 0.0 && merge_threshold <= 1.0)) out.emplace_back("merge_threshold must lie in [0,1]");
  if (descriptor_dim <= 0) out.emplace_back("descriptor_dim must be positive");
  if (!(ratio_threshold > 0.0 && ratio_threshold <= 1.0)) out.emplace_back("ratio_threshold must lie in (0,1]");
  if (min_region_matches < 1) out.emplace_back("min_region_matches must be >= 1");
  if (!(tau > 0.0 && tau <= 1.0)) out.emplace_back("tau must lie in (0,1]");
  if (epochs < 0) out.emplace_back("epochs must be >= 0");
  if (hidden_size < 1) out.emplace_back("hidden_size must be >= 1");
  if (!(learning_rate >= 0.0)) out.emplace_back("learning_rate must be >= 0");
  if (!(l2 >= 0.0)) out.emplace_back("l2 must be >= 0");
  if (batch_size < 1) out.emplace_back("batch_size must be >= 1");
  if (!(sample_size_fraction > 0.0 && sample_size_fraction <= 1.0)) {
    out.emplace_back("sample_size_fraction must lie in (0,1]");
  }
  return out;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "dataset = " << dataset << '\n'
     << "image_width = " << image_width << '\n'
     << "image_height = " << image_height << '\n'
     << "quantization_threshold = " << real(quantization_threshold) << '\n'
     << "merge_threshold = " << real(merge_threshold) << '\n'
     << "descriptor_dim = " << descriptor_dim << '\n'
     << "ratio_threshold = " << real(ratio_threshold) << '\n'
     << "min_region_matches = " << min_region_matches << '\n'
     << "tau = " << real(tau) << '\n'
     << "prototypes = " << (prototypes == PrototypeSet::kAll ? "all" : "train") << '\n'
     << "standardize_features = " << (standardize_features ? "true" : "false") << '\n'
     << "epochs = " << epochs << '\n'
     << "budget_unit = " << (budget_unit == BudgetUnit::kEpochs ? "epochs" : "steps") << '\n'
     << "hidden_size = " << hidden_size << '\n'
     << "learning_rate = " << real(learning_rate) << '\n'
     << "l2 = " << real(l2) << '\n'
     << "batch_size = " << batch_size << '\n'
     << "sample_size_fraction = " << real(sample_size_fraction) << '\n'
     << "optimizer = " << (optimizer == OptimizerKind::kGradientDescent ? "sgd" : "adam") << '\n'
     << "sampler = " << (sampler == SamplerKind::kImportance ? "importance" : "uniform") << '\n'
     << "seed = " << seed << '\n';
  return os.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(to_text()); }

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_run_config(std::string_view text) {
  struct Entry {
    std::size_t line;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ArtifactError(ArtifactError::Kind::kMalformed,
                          "config line " + std::to_string(line_no) + ": expected key = value");
    }
    entries.push_back({line_no, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1)))});
  }
  RunConfig config;
  // The preset goes first so explicit keys override it regardless of file order.
  for (const auto& e : entries) {
    if (e.key == "dataset") config = RunConfig::for_dataset(e.value);
  }
  for (const auto& e : entries) {
    if (e.key == "dataset") continue;
    try {
      config.set(e.key, e.value);
    } catch (const std::invalid_argument& err) {
      throw ArtifactError(ArtifactError::Kind::kMalformed, "config line " + std::to_string(e.line) + ": " + err.what());
    }
  }
  return config;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError(ArtifactError::Kind::kNotFound, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c = parse_run_config(ss.str());
  auto problems = c.validate();
  if (!problems.empty()) throw ArtifactError(ArtifactError::Kind::kInvariant, path.string() + ": " + problems.front());
  return c;
}

void write_run_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError(ArtifactError::Kind::kIo, "cannot write " + path.string());
  out << config.to_text();
  if (!out) throw ArtifactError(ArtifactError::Kind::kIo, "write failed for " + path.string());
}

}  // namespace grembed
