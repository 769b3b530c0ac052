#include "grembed/harness/stages.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "grembed/core/artifact_io.hpp"
#include "grembed/core/validate.hpp"
#include "grembed/embedding/embedding.hpp"
#include "grembed/frontend/arsrg_builder.hpp"
#include "grembed/frontend/descriptors.hpp"
#include "grembed/frontend/image.hpp"
#include "grembed/gcn/trainer.hpp"
#include "grembed/matcher/matcher.hpp"

namespace fs = std::filesystem;

namespace grembed {

namespace layout {
fs::path arsrg_dir(const fs::path& out) { return out / "arsrg"; }
fs::path arsrg_file(const fs::path& out, std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "%05zu.arsrg", index);
  return arsrg_dir(out) / name;
}
fs::path distances(const fs::path& out) { return out / "distances.gfg"; }
fs::path features(const fs::path& out) { return out / "features.gfg"; }
fs::path dataset_graph(const fs::path& out) { return out / "dataset_graph.gfg"; }
fs::path model(const fs::path& out) { return out / "model.gfg"; }
fs::path ova_model(const fs::path& out, std::size_t cls) { return out / ("model_ova_" + std::to_string(cls) + ".gfg"); }
fs::path reports(const fs::path& out) { return out / "reports.txt"; }
fs::path metrics(const fs::path& out, EvalMode mode) {
  return out / (std::string("metrics_") + to_string(mode) + ".txt");
}
fs::path confusion(const fs::path& out) { return out / "confusion.csv"; }
}  // namespace layout

namespace {

using Clock = std::chrono::steady_clock;

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<std::string> check(const DistanceMatrix& v) { return validate_distance_matrix(v); }
std::vector<std::string> check(const DatasetGraph& v) { return validate_dataset_graph(v); }
std::vector<std::string> check(const GcnModel& v) { return validate_model(v); }
std::vector<std::string> check(const Arsrg& v) { return validate_arsrg(v); }
std::vector<std::string> check(const Matrix& v) {
  if (all_finite(v)) return {};
  return {"matrix has non-finite entries"};
}

std::string join(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += "\n  " + l;
  return s;
}

template <typename T>
T load(const fs::path& path, const RunConfig& config) {
  if (!fs::exists(path)) throw StageError(kExitMissingInput, "missing input: " + path.string());
  Stamped<T> s;
  try {
    s = read_artifact<T>(path);
  } catch (const ArtifactError& e) {
    const int code = e.kind() == ArtifactError::Kind::kNotFound ? kExitMissingInput : kExitValidation;
    throw StageError(code, path.string() + ": " + e.what());
  }
  if (s.config_hash != config.hash()) {
    throw StageError(kExitHashMismatch, path.string() + " was produced under config " + hash_hex(s.config_hash) +
                                            ", current config is " + hash_hex(config.hash()));
  }
  if (const auto errors = check(s.value); !errors.empty()) {
    throw StageError(kExitValidation, path.string() + " is invalid:" + join(errors));
  }
  return std::move(s.value);
}

template <typename T>
void store(const fs::path& path, const T& value, const RunConfig& config) {
  try {
    write_artifact(path, value, config.hash());
  } catch (const ArtifactError& e) {
    const int code = e.kind() == ArtifactError::Kind::kInvariant ? kExitValidation : kExitFailure;
    throw StageError(code, e.what());
  }
}

const Manifest& need_manifest(const StageContext& ctx, Stage stage) {
  if (!ctx.manifest) throw StageError(kExitMissingInput, std::string(to_string(stage)) + " needs a manifest");
  if (ctx.manifest->entries.empty()) throw StageError(kExitValidation, "manifest has no entries");
  return *ctx.manifest;
}

void require_splits(const Manifest& m) {
  if (const auto errors = validate_manifest(m); !errors.empty()) {
    throw StageError(kExitValidation, "manifest is not ready for training:" + join(errors));
  }
}

void say(const StageContext& ctx, const std::string& line) {
  if (ctx.progress != nullptr) *ctx.progress << line << std::endl;
}

// Runs fn(i) for i in [0, n) on `workers` threads and rethrows the failure of
// the lowest index, so the reported error does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto count = static_cast<std::size_t>(std::max(1, workers));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(count, n); ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

fs::path descriptor_file(const fs::path& dir, const ManifestEntry& e) {
  fs::path rel(e.path);
  if (rel.is_absolute()) rel = rel.filename();
  rel.replace_extension(".desc");
  return dir / rel;
}

StageReport run_extract(const StageContext& ctx) {
  const Manifest& m = need_manifest(ctx, Stage::kExtract);
  const RunConfig& cfg = ctx.config;
  std::string missing;
  std::size_t missing_count = 0;
  for (const auto& e : m.entries) {
    std::vector<fs::path> needed = {m.resolve(e)};
    if (ctx.descriptor_dir) needed.push_back(descriptor_file(*ctx.descriptor_dir, e));
    for (const auto& p : needed) {
      if (fs::exists(p)) continue;
      ++missing_count;
      missing += "\n  " + p.string();
    }
  }
  if (missing_count > 0) {
    throw StageError(kExitMissingInput, std::to_string(missing_count) + " input file(s) missing:" + missing);
  }

  fs::create_directories(layout::arsrg_dir(ctx.out_dir));
  const auto labels = m.labels();
  const std::size_t n = m.entries.size();
  std::vector<std::size_t> regions(n), descriptors(n), edges(n);
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;
  parallel_for(n, ctx.workers, [&](std::size_t i) {
    const ManifestEntry& e = m.entries[i];
    Arsrg g;
    try {
      const Image img = load_and_resize(m.resolve(e), cfg.image_width, cfg.image_height);
      std::optional<std::vector<Descriptor>> imported;
      if (ctx.descriptor_dir) imported = import_descriptors(descriptor_file(*ctx.descriptor_dir, e), cfg.descriptor_dim);
      g = build_arsrg(img, cfg, labels[i], e.path, std::move(imported));
    } catch (const ImageError& err) {
      throw StageError(kExitValidation, e.path + ": " + err.what());
    } catch (const DescriptorFormatError& err) {
      throw StageError(kExitValidation, e.path + ": " + err.what());
    } catch (const std::invalid_argument& err) {
      throw StageError(kExitValidation, e.path + ": " + err.what());
    }
    store(layout::arsrg_file(ctx.out_dir, i), g, cfg);
    regions[i] = g.regions.size();
    descriptors[i] = g.descriptors.size();
    edges[i] = g.region_edges.size();
    const std::size_t k = ++done;
    if (ctx.progress != nullptr && (k % 10 == 0 || k == n)) {
      std::lock_guard lock(progress_mu);
      say(ctx, "extract " + std::to_string(k) + "/" + std::to_string(n));
    }
  });

  StageReport r{"extract", {}};
  std::size_t total_regions = 0, total_desc = 0, total_edges = 0, min_regions = SIZE_MAX;
  for (std::size_t i = 0; i < n; ++i) {
    total_regions += regions[i];
    total_desc += descriptors[i];
    total_edges += edges[i];
    min_regions = std::min(min_regions, regions[i]);
  }
  r.add("images", std::to_string(n));
  r.add("regions_total", std::to_string(total_regions));
  r.add("regions_min", std::to_string(min_regions));
  r.add("region_edges_total", std::to_string(total_edges));
  r.add("descriptors_total", std::to_string(total_desc));
  r.add("descriptor_source", ctx.descriptor_dir ? "imported" : "extracted");
  return r;
}

StageReport run_match(const StageContext& ctx) {
  const Manifest& m = need_manifest(ctx, Stage::kMatch);
  const std::size_t n = m.entries.size();
  std::vector<Arsrg> graphs(n);
  for (std::size_t i = 0; i < n; ++i) {
    graphs[i] = load<Arsrg>(layout::arsrg_file(ctx.out_dir, i), ctx.config);
    if (graphs[i].image_id != m.entries[i].path) {
      throw StageError(kExitValidation, layout::arsrg_file(ctx.out_dir, i).string() + " describes " +
                                            graphs[i].image_id + ", manifest expects " + m.entries[i].path);
    }
  }
  std::mutex mu;
  std::size_t last_reported = 0;
  const MatchProgress progress = [&](std::size_t done, std::size_t total) {
    if (ctx.progress == nullptr) return;
    std::lock_guard lock(mu);
    if (done != total && done < last_reported + std::max<std::size_t>(1, total / 20)) return;
    last_reported = done;
    say(ctx, "match " + std::to_string(done) + "/" + std::to_string(total));
  };
  const DistanceMatrix dm =
      build_distance_matrix(graphs, MatchParams::from_config(ctx.config), ctx.workers, progress);
  store(layout::distances(ctx.out_dir), dm, ctx.config);

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) sum += dm.values(i, j);
  }
  const std::size_t pairs = n * (n - 1) / 2;
  StageReport r{"match", {}};
  r.add("graphs", std::to_string(n));
  r.add("pairs", std::to_string(pairs));
  r.add("mean_distance", real(pairs > 0 ? sum / static_cast<double>(pairs) : 0.0));
  return r;
}

StageReport run_embed(const StageContext& ctx) {
  DistanceMatrix dm = load<DistanceMatrix>(layout::distances(ctx.out_dir), ctx.config);
  std::vector<std::size_t> prototypes;
  if (ctx.config.prototypes == PrototypeSet::kTrain) {
    const Manifest& m = need_manifest(ctx, Stage::kEmbed);
    if (m.entries.size() != dm.names.size()) throw StageError(kExitValidation, "manifest and distance matrix differ in size");
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      if (m.entries[i].split == Split::kTrain) prototypes.push_back(i);
    }
    if (prototypes.empty()) throw StageError(kExitValidation, "no training entries to use as prototypes");
  } else {
    for (std::size_t i = 0; i < dm.names.size(); ++i) prototypes.push_back(i);
  }
  Matrix x = embed(dm, prototypes);
  if (ctx.config.standardize_features) standardize_rows(x);
  store(layout::features(ctx.out_dir), x, ctx.config);
  StageReport r{"embed", {}};
  r.add("nodes", std::to_string(x.rows()));
  r.add("prototypes", std::to_string(x.cols()));
  r.add("standardized", ctx.config.standardize_features ? "true" : "false");
  return r;
}

StageReport run_graph(const StageContext& ctx) {
  const Manifest& m = need_manifest(ctx, Stage::kGraph);
  require_splits(m);
  DistanceMatrix dm = load<DistanceMatrix>(layout::distances(ctx.out_dir), ctx.config);
  Matrix x = load<Matrix>(layout::features(ctx.out_dir), ctx.config);
  if (dm.names.size() != m.entries.size() || x.rows() != m.entries.size()) {
    throw StageError(kExitValidation, "manifest has " + std::to_string(m.entries.size()) + " entries, artifacts have " +
                                          std::to_string(dm.names.size()));
  }
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    if (dm.names[i] != m.entries[i].path) {
      throw StageError(kExitValidation, "distance row " + std::to_string(i) + " is " + dm.names[i] +
                                            ", manifest expects " + m.entries[i].path);
    }
  }
  std::vector<Split> split;
  for (const auto& e : m.entries) split.push_back(*e.split);
  SparseMatrix a = build_adjacency(dm, ctx.config.tau);
  SparseMatrix a_hat = normalize_adjacency(a);
  DatasetGraph g;
  try {
    g = assemble_dataset_graph(std::move(x), std::move(a), std::move(a_hat), m.labels(), std::move(split),
                               m.class_names().size());
  } catch (const std::invalid_argument& e) {
    throw StageError(kExitValidation, e.what());
  }
  store(layout::dataset_graph(ctx.out_dir), g, ctx.config);

  StageReport r{"graph", {}};
  r.add("nodes", std::to_string(g.stats.node_count));
  r.add("edges", std::to_string(g.stats.edge_count));
  r.add("density", real(g.stats.density));
  r.add("tau", real(ctx.config.tau));
  const auto names = m.class_names();
  for (std::size_t c = 0; c < names.size(); ++c) r.add("class." + names[c] + ".nodes", std::to_string(g.stats.class_histogram[c]));
  return r;
}

DatasetGraph one_vs_all(const DatasetGraph& g, std::size_t cls) {
  DatasetGraph b = g;
  for (int& y : b.labels) y = y == static_cast<int>(cls) ? 1 : 0;
  b.num_classes = 2;
  b.stats = compute_graph_stats(b.adjacency, b.labels, 2);
  return b;
}

TrainResult train_logged(const StageContext& ctx, const DatasetGraph& g, const fs::path& log_path,
                         const std::string& tag) {
  TrainOptions opts;
  opts.eval_every = std::max(1, ctx.config.epochs / 100);
  const int every = std::max(1, ctx.config.epochs / 10);
  opts.on_epoch = [&](const EpochRecord& e) {
    if (e.epoch % every != 0) return;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s epoch %d loss %.6f train %.4f test %.4f", tag.c_str(), e.epoch, e.loss,
                  e.train_accuracy, e.test_accuracy);
    say(ctx, buf);
  };
  TrainResult res;
  try {
    res = train(g, ctx.config, opts);
  } catch (const TrainingDiverged& e) {
    throw StageError(kExitFailure, e.what());
  } catch (const std::invalid_argument& e) {
    throw StageError(kExitValidation, e.what());
  }
  std::ofstream log(log_path, std::ios::binary);
  write_train_log(log, res.report);
  if (!log) throw StageError(kExitFailure, "cannot write " + log_path.string());
  return res;
}

StageReport run_train(const StageContext& ctx) {
  const DatasetGraph g = load<DatasetGraph>(layout::dataset_graph(ctx.out_dir), ctx.config);
  StageReport r{"train", {}};
  r.add("mode", to_string(ctx.mode));
  if (ctx.mode == EvalMode::kMulticlass) {
    const TrainResult res = train_logged(ctx, g, ctx.out_dir / "train_log.csv", "train");
    store(layout::model(ctx.out_dir), res.model, ctx.config);
    const EpochRecord& last = res.report.epochs.back();
    r.add("steps", std::to_string(res.report.steps));
    r.add("final_loss", real(last.loss));
    r.add("train_accuracy", real(last.train_accuracy));
    r.add("test_accuracy", real(last.test_accuracy));
    return r;
  }
  for (std::size_t c = 0; c < g.num_classes; ++c) {
    const std::string tag = "ova" + std::to_string(c);
    const TrainResult res = train_logged(ctx, one_vs_all(g, c), ctx.out_dir / ("train_log_" + tag + ".csv"), tag);
    store(layout::ova_model(ctx.out_dir, c), res.model, ctx.config);
    r.add("class." + std::to_string(c) + ".final_loss", real(res.report.epochs.back().loss));
  }
  return r;
}

std::vector<std::string> class_names_for(const StageContext& ctx, std::size_t num_classes) {
  if (ctx.manifest) {
    auto names = ctx.manifest->class_names();
    if (names.size() == num_classes) return names;
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < num_classes; ++c) names.push_back(std::to_string(c));
  return names;
}

void write_text(const fs::path& path, const std::string& text) {
  try {
    write_file_bytes(path, text);
  } catch (const ArtifactError& e) {
    throw StageError(kExitFailure, e.what());
  }
}

StageReport run_eval(const StageContext& ctx) {
  const DatasetGraph g = load<DatasetGraph>(layout::dataset_graph(ctx.out_dir), ctx.config);
  const auto names = class_names_for(ctx, g.num_classes);
  StageReport r{"eval", {}};
  r.add("mode", to_string(ctx.mode));
  std::ostringstream metrics;
  if (ctx.mode == EvalMode::kMulticlass) {
    const GcnModel model = load<GcnModel>(layout::model(ctx.out_dir), ctx.config);
    const Prediction p = predict(model, g);
    const MulticlassMetrics mm = evaluate_multiclass(p.predicted, g.labels, g.split, g.num_classes);
    write_metrics(metrics, mm, names);
    std::ostringstream conf;
    write_confusion_csv(conf, mm, names);
    write_text(layout::confusion(ctx.out_dir), conf.str());
    r.add("test_count", std::to_string(mm.test_count));
    r.add("test_accuracy", real(mm.accuracy));
    r.add("train_accuracy", real(p.train_accuracy));
  } else {
    std::vector<std::vector<int>> in_class;
    for (std::size_t c = 0; c < g.num_classes; ++c) {
      const GcnModel model = load<GcnModel>(layout::ova_model(ctx.out_dir, c), ctx.config);
      in_class.push_back(predict(model, g).predicted);
    }
    const OvaMetrics om = evaluate_ova(in_class, g.labels, g.split);
    write_metrics(metrics, om, names);
    r.add("test_count", std::to_string(om.test_count));
    r.add("macro_accuracy", real(om.macro_accuracy));
  }
  write_text(layout::metrics(ctx.out_dir, ctx.mode), metrics.str());
  return r;
}

void append_report(const fs::path& out_dir, const StageReport& r, const RunConfig& config, double seconds) {
  std::ofstream f(layout::reports(out_dir), std::ios::app | std::ios::binary);
  f << '[' << r.stage << "]\n";
  f << "config_hash = " << hash_hex(config.hash()) << '\n';
  for (const auto& [k, v] : r.values) f << k << " = " << v << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "seconds = %.3f\n\n", seconds);
  f << buf;
  if (!f) throw StageError(kExitFailure, "cannot append to " + layout::reports(out_dir).string());
}

StageReport run_single(Stage stage, const StageContext& ctx) {
  switch (stage) {
    case Stage::kExtract: return run_extract(ctx);
    case Stage::kMatch: return run_match(ctx);
    case Stage::kEmbed: return run_embed(ctx);
    case Stage::kGraph: return run_graph(ctx);
    case Stage::kTrain: return run_train(ctx);
    case Stage::kEval: return run_eval(ctx);
    case Stage::kPipeline: break;
  }
  throw std::logic_error("pipeline is not a single stage");
}

}  // namespace

std::string StageReport::get(std::string_view key) const {
  for (const auto& [k, v] : values) {
    if (k == key) return v;
  }
  return {};
}

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::kExtract, Stage::kMatch, Stage::kEmbed, Stage::kGraph, Stage::kTrain, Stage::kEval,
                  Stage::kPipeline}) {
    if (name == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown stage '" + std::string(name) + "'");
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::kExtract: return "extract";
    case Stage::kMatch: return "match";
    case Stage::kEmbed: return "embed";
    case Stage::kGraph: return "graph";
    case Stage::kTrain: return "train";
    case Stage::kEval: return "eval";
    case Stage::kPipeline: return "pipeline";
  }
  return "?";
}

std::vector<StageReport> run_stage(Stage stage, const StageContext& ctx) {
  if (const auto errors = ctx.config.validate(); !errors.empty()) {
    throw StageError(kExitValidation, "invalid configuration:" + join(errors));
  }
  std::error_code ec;
  fs::create_directories(ctx.out_dir, ec);
  if (ec) throw StageError(kExitFailure, "cannot create " + ctx.out_dir.string() + ": " + ec.message());
  write_run_config(ctx.out_dir / "run_config.txt", ctx.config);

  const std::vector<Stage> chain = stage == Stage::kPipeline
                                       ? std::vector<Stage>{Stage::kExtract, Stage::kMatch, Stage::kEmbed, Stage::kGraph,
                                                            Stage::kTrain, Stage::kEval}
                                       : std::vector<Stage>{stage};
  std::vector<StageReport> reports;
  const auto t_all = Clock::now();
  for (Stage s : chain) {
    say(ctx, std::string("stage ") + to_string(s));
    const auto t0 = Clock::now();
    StageReport r;
    try {
      r = run_single(s, ctx);
    } catch (const StageError&) {
      throw;
    } catch (const CoverageError& e) {
      throw StageError(kExitValidation, e.what());
    } catch (const ManifestError& e) {
      throw StageError(kExitValidation, e.what());
    } catch (const fs::filesystem_error& e) {
      throw StageError(kExitFailure, e.what());
    }
    append_report(ctx.out_dir, r, ctx.config, seconds_since(t0));
    reports.push_back(std::move(r));
  }
  if (stage == Stage::kPipeline) {
    StageReport summary{"pipeline", {}};
    summary.add("mode", to_string(ctx.mode));
    const StageReport& ev = reports.back();
    if (ctx.mode == EvalMode::kMulticlass) {
      summary.add("test_accuracy", ev.get("test_accuracy"));
    } else {
      summary.add("macro_accuracy", ev.get("macro_accuracy"));
    }
    append_report(ctx.out_dir, summary, ctx.config, seconds_since(t_all));
    reports.push_back(std::move(summary));
  }
  return reports;
}

}  // namespace grembed
