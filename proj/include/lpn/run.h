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
#ifndef LPN_RUN_H_
#define LPN_RUN_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lpn/config.h"
#include "lpn/data.h"
#include "lpn/eval.h"
#include "lpn/model.h"
#include "lpn/objective.h"

namespace lpn {

// Everything a training run needs. Keys: model.*, train.*, data.root,
// run.output_dir, run.seed, run.workers.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string data_root;
  std::string output_dir = "runs/latest";
  std::uint64_t seed = 0;
  int workers = 1;

  RunConfig() { model.num_classes = 0; }  // 0: infer from the training data

  // Throws ConfigError. num_classes = 0 is allowed here.
  void Validate() const;
  KeyValueConfig ToKeyValues() const;
  // Rejects unknown keys.
  static RunConfig FromKeyValues(const KeyValueConfig& kv);
  static RunConfig Load(const std::string& path);
};

// Git blob id of `content` ("blob <size>\0" prefix, SHA-1, hex).
std::string GitBlobHash(const std::string& content);
std::string GitBlobHashFile(const std::string& path);

// Writes `<dir>/manifests/<split>_<platform>.csv` for each manifest.
void WriteManifests(const std::vector<DatasetManifest>& manifests, const std::string& dir);

// Refuses a non-empty `out_dir` unless `force`; prints a per-manifest summary.
std::vector<DatasetManifest> CmdSynth(const SyntheticSceneSpec& spec, const std::string& out_dir,
                                      bool force, std::ostream& log);

// Trains on the train split under config.data_root. The output dir receives
// config.txt (resolved), seed.txt, inputs.sha1, loss_log.csv, checkpoint.bin
// (rewritten after every epoch) and the training manifests. With `resume`,
// continues from that checkpoint's completed epoch count.
TrainResult CmdTrain(const RunConfig& config, const std::optional<std::string>& resume,
                     std::ostream& log);

struct EmbedOptions {
  std::string checkpoint;
  std::string manifest;  // CSV written by WriteManifests
  std::string root;      // manifest root; default: the tree the CSV sits in
  std::string output;    // concatenated descriptors; parts go to <stem>.part<k>.bin
  int batch_size = 16;
  int workers = 1;
};
EmbeddingSet CmdEmbed(const EmbedOptions& options, std::ostream& log);

struct EvalOptions {
  std::string query;    // embedding file
  std::string gallery;  // embedding file
  std::string output;   // CSV report
  // Rotation and shift probes re-embed the queries and need both.
  std::string checkpoint;
  std::string query_manifest;
  std::string query_root;
  std::vector<double> rotations;
  std::vector<int> shifts;
  std::vector<int> query_parts;  // empty: no part probe
  std::vector<int> gallery_parts;
  std::string distractors;  // embedding file
  int workers = 1;
};
std::vector<MetricRow> CmdEval(const EvalOptions& options, std::ostream& log);

}  // namespace lpn

#endif  // LPN_RUN_H_
