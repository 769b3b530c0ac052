// grembed-fastgcn: stage runner for the image-graph classification pipeline.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "grembed/core/artifact_io.hpp"
#include "grembed/core/run_config.hpp"
#include "grembed/harness/manifest.hpp"
#include "grembed/harness/protocols.hpp"
#include "grembed/harness/stages.hpp"
#include "grembed/harness/toy_dataset.hpp"

namespace fs = std::filesystem;
using namespace grembed;

namespace {

struct StageArgs {
  std::string config_path;
  std::string manifest_path;
  std::string out_dir;
  int workers = 1;
  std::optional<std::uint64_t> seed;
  std::string mode = "multiclass";
  std::optional<std::size_t> limit_classes;
  std::string descriptor_dir;
  std::vector<std::string> overrides;
  bool quiet = false;
};

RunConfig resolve_config(const StageArgs& a, const std::optional<Manifest>& manifest) {
  RunConfig config;
  if (!a.config_path.empty()) {
    config = read_run_config(a.config_path);
  } else if (manifest && !manifest->dataset.empty()) {
    try {
      config = RunConfig::for_dataset(manifest->dataset);
    } catch (const std::invalid_argument&) {
      // unknown dataset name: keep the defaults
    }
  }
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    auto strip = [](std::string s) {
      s.erase(0, s.find_first_not_of(' '));
      s.erase(s.find_last_not_of(' ') + 1);
      return s;
    };
    config.set(strip(kv.substr(0, eq)), strip(kv.substr(eq + 1)));
  }
  if (a.seed) config.seed = *a.seed;
  return config;
}

int run_stage_command(Stage stage, const StageArgs& a) {
  std::optional<Manifest> manifest;
  if (!a.manifest_path.empty()) {
    manifest = read_manifest(a.manifest_path);
    if (a.limit_classes) manifest = limit_classes(*manifest, *a.limit_classes);
  }
  StageContext ctx;
  ctx.config = resolve_config(a, manifest);
  ctx.manifest = std::move(manifest);
  ctx.out_dir = a.out_dir;
  ctx.workers = a.workers;
  ctx.mode = parse_eval_mode(a.mode);
  if (!a.descriptor_dir.empty()) ctx.descriptor_dir = fs::path(a.descriptor_dir);
  ctx.progress = a.quiet ? nullptr : &std::cerr;
  for (const auto& r : run_stage(stage, ctx)) {
    std::cout << '[' << r.stage << "]\n";
    for (const auto& [k, v] : r.values) std::cout << k << " = " << v << '\n';
  }
  return kExitOk;
}

int exit_code_for_artifact(const ArtifactError& e) {
  return e.kind() == ArtifactError::Kind::kNotFound ? kExitMissingInput : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-graph embedding with importance-sampled GCN training"};
  app.require_subcommand(1);

  StageArgs stage_args;
  std::optional<Stage> chosen;
  for (Stage s : {Stage::kExtract, Stage::kMatch, Stage::kEmbed, Stage::kGraph, Stage::kTrain, Stage::kEval,
                  Stage::kPipeline}) {
    CLI::App* sub = app.add_subcommand(to_string(s), std::string("run the ") + to_string(s) + " stage");
    sub->add_option("--config", stage_args.config_path, "key = value run configuration");
    sub->add_option("--manifest", stage_args.manifest_path, "path<TAB>class<TAB>split list");
    sub->add_option("--out", stage_args.out_dir, "artifact directory")->required();
    sub->add_option("--workers", stage_args.workers, "threads for extract and match")->check(CLI::PositiveNumber);
    sub->add_option("--seed", stage_args.seed, "overrides the config seed");
    sub->add_option("--mode", stage_args.mode, "multiclass or ova")->check(CLI::IsMember({"multiclass", "ova"}));
    sub->add_option("--limit-classes", stage_args.limit_classes, "keep the first N classes of the manifest");
    sub->add_option("--descriptors", stage_args.descriptor_dir,
                    "directory of .desc keypoint files mirroring the manifest paths");
    sub->add_option("--set", stage_args.overrides, "config override key=value (repeatable)");
    sub->add_flag("--quiet", stage_args.quiet, "no progress on stderr");
    sub->callback([s, &chosen] { chosen = s; });
  }

  std::string toy_out;
  std::uint64_t toy_seed = 1;
  CLI::App* toy = app.add_subcommand("toy", "render the 60-image synthetic dataset");
  toy->add_option("--out", toy_out, "output directory")->required();
  toy->add_option("--seed", toy_seed, "generator seed");

  std::string split_protocol;
  std::string split_in;
  std::string split_out;
  std::uint64_t split_seed = 1;
  CLI::App* split = app.add_subcommand("split", "assign train/test splits by the COIL or ETH protocol");
  split->add_option("--protocol", split_protocol, "coil or eth")->required()->check(CLI::IsMember({"coil", "eth"}));
  split->add_option("--manifest", split_in, "input manifest")->required();
  split->add_option("--out", split_out, "output manifest")->required();
  split->add_option("--seed", split_seed, "selection seed");

  std::string scan_layout;
  std::string scan_root;
  std::string scan_out;
  std::string scan_dataset = "custom";
  CLI::App* scan = app.add_subcommand("scan", "build a manifest from an image directory");
  scan->add_option("--layout", scan_layout, "coil, eth or folders")->required()->check(
      CLI::IsMember({"coil", "eth", "folders"}));
  scan->add_option("--root", scan_root, "image directory")->required();
  scan->add_option("--out", scan_out, "output manifest")->required();
  scan->add_option("--dataset", scan_dataset, "dataset name recorded for the folders layout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;  // --help exits 0
  }

  try {
    if (chosen) return run_stage_command(*chosen, stage_args);
    if (toy->parsed()) {
      const Manifest m = generate_toy_dataset(toy_out, toy_seed);
      std::cout << "wrote " << m.entries.size() << " images and " << (fs::path(toy_out) / "manifest.tsv").string()
                << '\n';
      return kExitOk;
    }
    if (split->parsed()) {
      const Manifest in = read_manifest(split_in);
      const Manifest out = split_protocol == "coil" ? split_coil_protocol(in, split_seed) : split_eth_protocol(in, split_seed);
      // Entries stay relative to the input manifest's directory.
      Manifest rebased = out;
      const fs::path out_dir = fs::absolute(split_out).parent_path();
      for (auto& e : rebased.entries) {
        if (!fs::path(e.path).is_absolute()) e.path = fs::relative(fs::absolute(in.resolve(e)), out_dir).generic_string();
      }
      write_manifest(split_out, rebased);
      std::cout << "wrote " << rebased.entries.size() << " entries to " << split_out << '\n';
      return kExitOk;
    }
    if (scan->parsed()) {
      Manifest m = scan_layout == "coil"  ? scan_coil_directory(scan_root)
                   : scan_layout == "eth" ? scan_eth_directory(scan_root)
                                          : scan_class_folders(scan_root, scan_dataset);
      const fs::path out_dir = fs::absolute(scan_out).parent_path();
      for (auto& e : m.entries) e.path = fs::relative(fs::absolute(m.resolve(e)), out_dir).generic_string();
      write_manifest(scan_out, m);
      std::cout << "wrote " << m.entries.size() << " entries to " << scan_out << '\n';
      return kExitOk;
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code();
  } catch (const ArtifactError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for_artifact(e);
  } catch (const ManifestError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
