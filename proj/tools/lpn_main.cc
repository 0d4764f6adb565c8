/* Copyright 2026 The LPN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
// Command-line driver: synth, train, embed, eval.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lpn/errors.h"
#include "lpn/run.h"

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kNumerical = 4 };

std::string EnvOr(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

int EnvWorkers() {
  const std::string v = EnvOr("LPN_WORKERS", "1");
  try {
    const int n = std::stoi(v);
    if (n >= 1) return n;
  } catch (const std::exception&) {
  }
  throw lpn::ConfigError("LPN_WORKERS must be a positive integer, got '" + v + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LPN cross-view geo-localization pipeline"};
  app.require_subcommand(1);

  // synth
  lpn::SyntheticSceneSpec spec;
  std::string synth_out;
  bool force = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic University-style dataset");
  synth->add_option("--out", synth_out, "Output directory (default: $LPN_OUTPUT_DIR)");
  synth->add_option("--classes", spec.num_classes, "Training scenes")->capture_default_str();
  synth->add_option("--test-classes", spec.num_test_classes, "Held-out scenes (0: same as --classes)")
      ->capture_default_str();
  synth->add_option("--image-size", spec.image_size, "Square image side")->capture_default_str();
  synth->add_option("--drone-views", spec.drone_views, "Drone views per scene")->capture_default_str();
  synth->add_option("--group-size", spec.group_size, "Scenes sharing a palette")->capture_default_str();
  synth->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  synth->add_flag("--force", force, "Overwrite a non-empty output directory");

  // train
  std::string config_path;
  std::optional<std::string> resume;
  std::vector<std::string> overrides;
  std::string output_dir, data_root;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  bool dump_config = false;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config_path, "Key-value config file");
  train->add_option("--resume", resume, "Continue from a checkpoint");
  train->add_option("--set", overrides, "Override a config key (key=value); repeatable");
  train->add_option("--output-dir", output_dir, "Run directory (default: $LPN_OUTPUT_DIR)");
  train->add_option("--data-root", data_root, "Dataset root");
  train->add_option("--seed", seed, "Root seed");
  train->add_option("--epochs", epochs, "Number of epochs");
  train->add_flag("--dump-config", dump_config, "Print the resolved config and exit");

  // embed
  lpn::EmbedOptions embed_opts;
  auto* embed = app.add_subcommand("embed", "Write descriptors for a manifest");
  embed->add_option("--checkpoint", embed_opts.checkpoint, "Checkpoint file")->required();
  embed->add_option("--manifest", embed_opts.manifest, "Manifest CSV")->required();
  embed->add_option("--root", embed_opts.root, "Dataset root (default: inferred from the CSV)");
  embed->add_option("--out", embed_opts.output, "Output embedding file")->required();
  embed->add_option("--batch-size", embed_opts.batch_size, "Images per forward pass")
      ->capture_default_str();

  // eval
  lpn::EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Rank queries against a gallery and report metrics");
  eval->add_option("--query", eval_opts.query, "Query embedding file")->required();
  eval->add_option("--gallery", eval_opts.gallery, "Gallery embedding file")->required();
  eval->add_option("--out", eval_opts.output, "Metric report CSV");
  eval->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint for re-embedding probes");
  eval->add_option("--query-manifest", eval_opts.query_manifest, "Query manifest CSV");
  eval->add_option("--query-root", eval_opts.query_root, "Query dataset root");
  eval->add_option("--rotate", eval_opts.rotations, "Query rotation angles in degrees")
      ->delimiter(',');
  eval->add_option("--shift", eval_opts.shifts, "Query left shifts in pixels")->delimiter(',');
  eval->add_option("--query-parts", eval_opts.query_parts, "1-based query parts")->delimiter(',');
  eval->add_option("--gallery-parts", eval_opts.gallery_parts, "1-based gallery parts")
      ->delimiter(',');
  eval->add_option("--distractors", eval_opts.distractors, "Embedding file of distractors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const int workers = EnvWorkers();
    if (synth->parsed()) {
      if (synth_out.empty()) synth_out = EnvOr("LPN_OUTPUT_DIR", "");
      if (synth_out.empty()) throw lpn::ConfigError("synth needs --out or LPN_OUTPUT_DIR");
      lpn::CmdSynth(spec, synth_out, force, std::cout);
    } else if (train->parsed()) {
      lpn::KeyValueConfig kv;
      if (!config_path.empty()) {
        if (!std::filesystem::is_regular_file(config_path)) {
          throw lpn::ConfigError("config file '" + config_path + "' not found");
        }
        kv = lpn::KeyValueConfig::Load(config_path);
      }
      if (!kv.Has("run.output_dir")) kv.Set("run.output_dir", EnvOr("LPN_OUTPUT_DIR", "runs/latest"));
      if (!kv.Has("run.workers")) kv.Set("run.workers", workers);
      for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw lpn::ConfigError("--set expects key=value, got '" + o + "'");
        kv.Set(lpn::Trim(o.substr(0, eq)), lpn::Trim(o.substr(eq + 1)));
      }
      if (!output_dir.empty()) kv.Set("run.output_dir", output_dir);
      if (!data_root.empty()) kv.Set("data.root", data_root);
      if (seed) kv.Set("run.seed", *seed);
      if (epochs) kv.Set("train.epochs", *epochs);
      const lpn::RunConfig config = lpn::RunConfig::FromKeyValues(kv);
      if (dump_config) {
        config.ToKeyValues().Write(std::cout);
        return kOk;
      }
      lpn::CmdTrain(config, resume, std::cout);
    } else if (embed->parsed()) {
      embed_opts.workers = workers;
      lpn::CmdEmbed(embed_opts, std::cout);
    } else if (eval->parsed()) {
      eval_opts.workers = workers;
      lpn::CmdEval(eval_opts, std::cout);
    }
  } catch (const lpn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const lpn::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const lpn::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
