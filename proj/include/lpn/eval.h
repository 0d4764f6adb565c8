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
#ifndef LPN_EVAL_H_
#define LPN_EVAL_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lpn/data.h"
#include "lpn/model.h"
#include "lpn/tensor.h"

namespace lpn {

// Label carried by injected gallery items. Never equal to a query label.
inline constexpr int kDistractorLabel = -1;

// Row-major N x D descriptors with their class ids. When the rows are
// concatenated part descriptors, `num_parts` records the split; part p
// (1-based) occupies columns [(p-1)*part_dim(), p*part_dim()).
struct EmbeddingSet {
  int rows = 0;
  int cols = 0;
  std::vector<float> matrix;
  std::vector<int> ids;
  Platform platform = Platform::kSatellite;
  Split split = Split::kGallery;
  int num_parts = 1;

  int part_dim() const { return num_parts > 0 ? cols / num_parts : cols; }
  std::span<const float> row(int i) const {
    return {matrix.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }
  // Throws DataError on non-finite values or inconsistent sizes.
  void Validate() const;
  // Keeps only the listed 1-based parts, in the given order.
  EmbeddingSet SelectParts(std::span<const int> parts) const;

  // Binary layout, little-endian: "LPNEMB\0\0", u32 version, u64 N, u64 D,
  // u32 dtype (0 = float32), u32 parts, u32 platform, u32 split, N*D floats,
  // N int32 ids.
  void Save(const std::string& path) const;
  static EmbeddingSet Load(const std::string& path);
  // Debug export: `id,v0,v1,...` per row.
  void WriteCsv(std::ostream& os) const;

  bool operator==(const EmbeddingSet&) const = default;
};

struct RankingResult {
  int gallery_size = 0;
  // Per query: gallery indices by ascending distance, ties by index.
  std::vector<std::vector<int>> order;
  // Per query, aligned with `order`: label equality.
  std::vector<std::vector<char>> relevant;
};

// Euclidean ranking of every query against the gallery.
RankingResult Rank(const EmbeddingSet& queries, const EmbeddingSet& gallery);

// Fraction of queries with a relevant item in the top k. k is clamped to the
// gallery size.
double RecallAtK(const RankingResult& ranking, int k);

struct ApResult {
  std::vector<double> per_query;  // NaN for excluded queries
  double mean = 0.0;              // over included queries
  int excluded = 0;               // queries without any relevant item
};
ApResult AveragePrecision(const RankingResult& ranking);

// ceil(0.01 * gallery_size), at least 1.
int Top1PercentK(int gallery_size);

struct Metrics {
  double r1 = 0, r5 = 0, r10 = 0, r_top1pct = 0, ap = 0;
  int queries = 0;
  int excluded = 0;
  bool operator==(const Metrics&) const = default;
};
Metrics ComputeMetrics(const RankingResult& ranking);
Metrics Evaluate(const EmbeddingSet& queries, const EmbeddingSet& gallery);

struct MetricRow {
  std::string task;       // e.g. drone->satellite
  std::string transform;  // none, rotation, shift, parts, distractors
  std::string param;
  Metrics metrics;
};
// CSV `task,transform,param,R@1,R@5,R@10,R@top1pct,AP` behind a
// `# top1pct_rounding=ceil` line. Recall and AP are reported in [0, 1].
void WriteMetricReport(std::ostream& os, std::span<const MetricRow> rows);

// Eval-mode descriptors for preloaded images, in batches.
EmbeddingSet EmbedImages(Model& model, std::span<const Tensor> images, std::span<const int> ids,
                         Platform platform, Split split, int batch_size = 16);
EmbeddingSet EmbedManifest(Model& model, const DatasetManifest& manifest, int batch_size = 16);

struct ProbeResult {
  double param;
  Metrics metrics;
};

// Rotates each query (bilinear, reflect border, same size), re-embeds and
// ranks against the untouched gallery.
std::vector<ProbeResult> ProbeRotation(Model& model, std::span<const Tensor> query_images,
                                       std::span<const int> query_ids, Platform query_platform,
                                       const EmbeddingSet& gallery,
                                       std::span<const double> angles);
// Reflect-pads each query on the left by p pixels and crops back to size.
std::vector<ProbeResult> ProbeShift(Model& model, std::span<const Tensor> query_images,
                                    std::span<const int> query_ids, Platform query_platform,
                                    const EmbeddingSet& gallery, std::span<const int> pixels);
// Ranks with only the selected parts on each side. The sets may differ but
// must have the same size.
Metrics ProbePartCombination(const EmbeddingSet& queries, const EmbeddingSet& gallery,
                             std::span<const int> query_parts, std::span<const int> gallery_parts);

// Appends `extra` to the gallery with every extra id set to kDistractorLabel.
EmbeddingSet InjectDistractors(const EmbeddingSet& gallery, const EmbeddingSet& extra);

}  // namespace lpn

#endif  // LPN_EVAL_H_
