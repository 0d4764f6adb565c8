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
#include "lpn/run.h"

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "lpn/errors.h"
#include "lpn/seed.h"

namespace lpn {
namespace fs = std::filesystem;
namespace {

const std::vector<std::string>& RunKeys() {
  static const std::vector<std::string> keys = {"data.root", "run.output_dir", "run.seed",
                                                "run.workers"};
  return keys;
}

std::string ReadFile(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os || !(os << content)) throw DataError("cannot write '" + path.string() + "'");
}

std::string ManifestFileName(const DatasetManifest& m) {
  return std::string(SplitName(m.split)) + "_" + std::string(PlatformName(m.platform)) + ".csv";
}

std::string JoinInts(const std::vector<int>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

std::string FormatParam(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

// Manifests live in `<tree>/manifests/`; paths inside are relative to <tree>.
std::string DefaultManifestRoot(const std::string& csv) {
  const fs::path dir = fs::path(csv).parent_path();
  if (dir.filename() == "manifests") return dir.parent_path().string();
  return dir.empty() ? std::string(".") : dir.string();
}

DatasetManifest ReadManifestFile(const std::string& csv, const std::string& root) {
  std::ifstream is(csv);
  if (!is) throw DataError("cannot open manifest '" + csv + "'");
  return DatasetManifest::ReadCsv(is, root.empty() ? DefaultManifestRoot(csv) : root);
}

// One line per input file plus a final `tree` line hashing the listing.
std::string HashInputs(const std::string& config_text,
                       const std::vector<DatasetManifest>& manifests) {
  std::ostringstream listing;
  listing << GitBlobHash(config_text) << "  config.txt\n";
  for (const auto& m : manifests) {
    std::ostringstream csv;
    m.WriteCsv(csv);
    listing << GitBlobHash(csv.str()) << "  manifests/" << ManifestFileName(m) << '\n';
    for (const auto& e : m.entries) {
      listing << GitBlobHashFile(m.FullPath(e)) << "  " << e.path << '\n';
    }
  }
  const std::string body = listing.str();
  return body + GitBlobHash(body) + "  tree\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::Validate() const {
  ModelConfig probe = model;
  if (probe.num_classes == 0) probe.num_classes = 1;
  probe.Validate();
  train.Validate();
  if (data_root.empty()) throw ConfigError("data.root is required");
  if (output_dir.empty()) throw ConfigError("run.output_dir must not be empty");
  if (workers < 1) throw ConfigError("run.workers must be >= 1");
}

KeyValueConfig RunConfig::ToKeyValues() const {
  KeyValueConfig kv = model.ToKeyValues();
  kv.Merge(train.ToKeyValues());
  kv.Set("data.root", data_root);
  kv.Set("run.output_dir", output_dir);
  kv.Set("run.seed", seed);
  kv.Set("run.workers", workers);
  return kv;
}

RunConfig RunConfig::FromKeyValues(const KeyValueConfig& kv) {
  std::vector<std::string> known = ModelConfig::Keys();
  known.insert(known.end(), TrainConfig::Keys().begin(), TrainConfig::Keys().end());
  known.insert(known.end(), RunKeys().begin(), RunKeys().end());
  if (const auto unknown = kv.UnknownKeys(known); !unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config keys: " + list);
  }
  RunConfig c;
  KeyValueConfig model_kv = kv;
  if (!model_kv.Has("model.num_classes")) model_kv.Set("model.num_classes", 0);
  c.model = ModelConfig::FromKeyValues(model_kv);
  c.train = TrainConfig::FromKeyValues(kv);
  c.data_root = kv.GetString("data.root", c.data_root);
  c.output_dir = kv.GetString("run.output_dir", c.output_dir);
  c.seed = kv.GetUint64("run.seed", c.seed);
  c.workers = kv.GetInt("run.workers", c.workers);
  return c;
}

RunConfig RunConfig::Load(const std::string& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file '" + path + "' not found");
  return FromKeyValues(KeyValueConfig::Load(path));
}

// ---------------------------------------------------------------------------
// Hashing

std::string GitBlobHash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
    throw DataError("SHA-1 computation failed");
  }
  std::ostringstream hex;
  hex << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < length; ++i) hex << std::setw(2) << static_cast<int>(digest[i]);
  return hex.str();
}

std::string GitBlobHashFile(const std::string& path) { return GitBlobHash(ReadFile(path)); }

void WriteManifests(const std::vector<DatasetManifest>& manifests, const std::string& dir) {
  const fs::path out = fs::path(dir) / "manifests";
  fs::create_directories(out);
  for (const auto& m : manifests) {
    std::ostringstream csv;
    m.WriteCsv(csv);
    WriteFile(out / ManifestFileName(m), csv.str());
  }
}

// ---------------------------------------------------------------------------
// Commands

std::vector<DatasetManifest> CmdSynth(const SyntheticSceneSpec& spec, const std::string& out_dir,
                                      bool force, std::ostream& log) {
  spec.Validate();
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!force) {
      throw ConfigError("output directory '" + out_dir +
                        "' is not empty; pass --force to overwrite");
    }
    fs::remove_all(out_dir);
  }
  auto manifests = GenerateSynthetic(spec, out_dir);
  WriteManifests(manifests, out_dir);
  for (const auto& m : manifests) {
    log << SplitName(m.split) << '/' << PlatformName(m.platform) << ": " << m.NumClasses()
        << " classes, " << m.entries.size() << " images\n";
  }
  return manifests;
}

TrainResult CmdTrain(const RunConfig& config, const std::optional<std::string>& resume,
                     std::ostream& log) {
  config.Validate();
  const auto scanned =
      ScanUniversityLayout(config.data_root, [&](const std::string& w) { log << "warning: " << w << '\n'; });
  std::vector<DatasetManifest> manifests;
  for (Platform p : config.model.platforms) {
    const DatasetManifest* m = FindManifest(scanned, Split::kTrain, p);
    if (!m || m->entries.empty()) {
      throw DataError("no training images for platform '" + std::string(PlatformName(p)) +
                      "' under '" + config.data_root + "'");
    }
    manifests.push_back(*m);
  }
  RunConfig resolved = config;
  const int classes = manifests.front().NumClasses();
  if (resolved.model.num_classes == 0) {
    resolved.model.num_classes = classes;
  } else if (resolved.model.num_classes != classes) {
    throw ConfigError("model.num_classes = " + std::to_string(resolved.model.num_classes) +
                      " but the training data has " + std::to_string(classes) + " classes");
  }
  resolved.model.Validate();

  const fs::path dir(resolved.output_dir);
  fs::create_directories(dir);
  const std::string config_text = resolved.ToKeyValues().ToString();
  WriteFile(dir / "config.txt", config_text);
  WriteFile(dir / "seed.txt", std::to_string(resolved.seed) + "\n");
  WriteManifests(manifests, dir.string());
  WriteFile(dir / "inputs.sha1", HashInputs(config_text, manifests));

  std::vector<PlatformImages> data;
  for (const auto& m : manifests) {
    data.push_back({m.platform, LoadManifestImages(m, resolved.model.input_size, resolved.workers),
                    m.Labels()});
  }
  log << "loaded " << manifests.size() << " platforms, " << classes << " classes\n";

  Model model(resolved.model, DeriveSeed(resolved.seed, kInitStream));
  Trainer trainer(model, resolved.train, DeriveSeed(resolved.seed, kTrainStream));
  int start_epoch = 0;
  if (resume) {
    start_epoch = trainer.Resume(Checkpoint::Load(*resume));
    log << "resuming after epoch " << start_epoch << '\n';
  }

  const fs::path log_path = dir / "loss_log.csv";
  const bool append = resume.has_value() && fs::exists(log_path);
  std::ofstream loss_log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!loss_log) throw DataError("cannot write '" + log_path.string() + "'");
  if (!append) WriteLossLog(loss_log, {}, true);

  const std::string checkpoint_path = (dir / "checkpoint.bin").string();
  TrainResult result;
  result.log = trainer.Run(data, start_epoch, [&](const EpochLog& e) {
    WriteLossLog(loss_log, std::span(&e, 1), false);
    loss_log.flush();
    trainer.MakeCheckpoint(e.epoch).Save(checkpoint_path);
    log << "epoch " << e.epoch << " loss " << e.mean_loss << " lr " << e.lr_backbone << '/'
        << e.lr_new << '\n';
  });
  const int completed = result.log.empty() ? start_epoch : result.log.back().epoch;
  result.checkpoint = trainer.MakeCheckpoint(completed);
  result.checkpoint.Save(checkpoint_path);
  return result;
}

EmbeddingSet CmdEmbed(const EmbedOptions& options, std::ostream& log) {
  if (options.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  if (options.manifest.empty()) throw ConfigError("--manifest is required");
  if (options.output.empty()) throw ConfigError("--out is required");
  Model model = Model::FromCheckpoint(Checkpoint::Load(options.checkpoint));
  const DatasetManifest manifest = ReadManifestFile(options.manifest, options.root);
  const auto images = LoadManifestImages(manifest, model.config().input_size, options.workers);
  const auto ids = manifest.Labels();
  const EmbeddingSet set =
      EmbedImages(model, images, ids, manifest.platform, manifest.split, options.batch_size);
  set.Save(options.output);
  const fs::path out(options.output);
  for (int p = 1; p <= set.num_parts; ++p) {
    const int part[1] = {p};
    fs::path part_path = out;
    part_path.replace_filename(out.stem().string() + ".part" + std::to_string(p) +
                               out.extension().string());
    set.SelectParts(part).Save(part_path.string());
  }
  log << "embedded " << set.rows << " images, dim " << set.cols << " (" << set.num_parts
      << " parts)\n";
  return set;
}

std::vector<MetricRow> CmdEval(const EvalOptions& options, std::ostream& log) {
  if (options.query.empty() || options.gallery.empty()) {
    throw ConfigError("--query and --gallery are required");
  }
  const bool needs_model = !options.rotations.empty() || !options.shifts.empty();
  if (needs_model && (options.checkpoint.empty() || options.query_manifest.empty())) {
    throw ConfigError("rotation and shift probes need --checkpoint and --query-manifest");
  }
  if (options.query_parts.empty() != options.gallery_parts.empty()) {
    throw ConfigError("--query-parts and --gallery-parts must be given together");
  }
  const EmbeddingSet queries = EmbeddingSet::Load(options.query);
  const EmbeddingSet gallery = EmbeddingSet::Load(options.gallery);
  const std::string task = std::string(PlatformName(queries.platform)) + "->" +
                           std::string(PlatformName(gallery.platform));

  std::vector<MetricRow> rows;
  rows.push_back({task, "none", "", Evaluate(queries, gallery)});

  if (needs_model) {
    Model model = Model::FromCheckpoint(Checkpoint::Load(options.checkpoint));
    const DatasetManifest manifest = ReadManifestFile(options.query_manifest, options.query_root);
    if (static_cast<int>(manifest.entries.size()) != queries.rows) {
      throw DataError("query manifest has " + std::to_string(manifest.entries.size()) +
                      " entries but the query embeddings have " + std::to_string(queries.rows));
    }
    const auto images = LoadManifestImages(manifest, model.config().input_size, options.workers);
    for (const auto& r : ProbeRotation(model, images, queries.ids, queries.platform, gallery,
                                       options.rotations)) {
      rows.push_back({task, "rotation", FormatParam(r.param), r.metrics});
    }
    for (const auto& r :
         ProbeShift(model, images, queries.ids, queries.platform, gallery, options.shifts)) {
      rows.push_back({task, "shift", FormatParam(r.param), r.metrics});
    }
  }
  if (!options.query_parts.empty()) {
    rows.push_back({task, "parts",
                    "q=" + JoinInts(options.query_parts, '+') + " g=" +
                        JoinInts(options.gallery_parts, '+'),
                    ProbePartCombination(queries, gallery, options.query_parts,
                                         options.gallery_parts)});
  }
  if (!options.distractors.empty()) {
    const EmbeddingSet extra = EmbeddingSet::Load(options.distractors);
    rows.push_back({task, "distractors", std::to_string(extra.rows),
                    Evaluate(queries, InjectDistractors(gallery, extra))});
  }

  if (!options.output.empty()) {
    std::ofstream os(options.output, std::ios::trunc);
    if (!os) throw DataError("cannot write report '" + options.output + "'");
    WriteMetricReport(os, rows);
  }
  WriteMetricReport(log, rows);
  return rows;
}

}  // namespace lpn
