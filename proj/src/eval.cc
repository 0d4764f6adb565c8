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
#include "lpn/eval.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "binary_io.h"
#include "lpn/errors.h"
#include "lpn/image_ops.h"

namespace lpn {
namespace {

constexpr char kEmbeddingMagic[8] = {'L', 'P', 'N', 'E', 'M', 'B', '\0', '\0'};
constexpr std::uint32_t kEmbeddingVersion = 1;
constexpr std::uint32_t kFloat32 = 0;

double SquaredDistance(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum;
}

void CheckParts(std::span<const int> parts, int num_parts) {
  if (parts.empty()) throw ConfigError("part selection is empty");
  for (int p : parts) {
    if (p < 1 || p > num_parts) {
      throw ConfigError("part " + std::to_string(p) + " outside [1, " + std::to_string(num_parts) +
                        "]");
    }
  }
}

template <typename Transform>
std::vector<ProbeResult> RunProbe(Model& model, std::span<const Tensor> images,
                                  std::span<const int> ids, Platform platform,
                                  const EmbeddingSet& gallery, std::span<const double> params,
                                  Transform transform) {
  std::vector<ProbeResult> results;
  for (double param : params) {
    std::vector<Tensor> moved;
    moved.reserve(images.size());
    for (const Tensor& img : images) moved.push_back(transform(img, param));
    const EmbeddingSet queries = EmbedImages(model, moved, ids, platform, Split::kQuery);
    results.push_back({param, Evaluate(queries, gallery)});
  }
  return results;
}

}  // namespace

// ---------------------------------------------------------------------------
// EmbeddingSet

void EmbeddingSet::Validate() const {
  if (rows < 0 || cols < 0) throw DataError("negative embedding dimensions");
  if (matrix.size() != static_cast<std::size_t>(rows) * cols) {
    throw DataError("embedding matrix holds " + std::to_string(matrix.size()) +
                    " values, expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (ids.size() != static_cast<std::size_t>(rows)) throw DataError("embedding id count mismatch");
  if (num_parts < 1 || cols % num_parts != 0) {
    throw DataError("embedding width " + std::to_string(cols) + " is not divisible into " +
                    std::to_string(num_parts) + " parts");
  }
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    if (!std::isfinite(matrix[i])) {
      throw DataError("non-finite embedding value in row " + std::to_string(i / cols));
    }
  }
}

EmbeddingSet EmbeddingSet::SelectParts(std::span<const int> parts) const {
  CheckParts(parts, num_parts);
  const int dim = part_dim();
  EmbeddingSet out = *this;
  out.num_parts = static_cast<int>(parts.size());
  out.cols = dim * out.num_parts;
  out.matrix.assign(static_cast<std::size_t>(rows) * out.cols, 0.0f);
  for (int r = 0; r < rows; ++r) {
    float* dst = out.matrix.data() + static_cast<std::size_t>(r) * out.cols;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const float* src = matrix.data() + static_cast<std::size_t>(r) * cols + (parts[k] - 1) * dim;
      std::copy(src, src + dim, dst + k * dim);
    }
  }
  return out;
}

void EmbeddingSet::Save(const std::string& path) const {
  Validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write embeddings '" + path + "'");
  os.write(kEmbeddingMagic, sizeof(kEmbeddingMagic));
  io::WriteU32(os, kEmbeddingVersion);
  io::WriteU64(os, static_cast<std::uint64_t>(rows));
  io::WriteU64(os, static_cast<std::uint64_t>(cols));
  io::WriteU32(os, kFloat32);
  io::WriteU32(os, static_cast<std::uint32_t>(num_parts));
  io::WriteU32(os, static_cast<std::uint32_t>(platform));
  io::WriteU32(os, static_cast<std::uint32_t>(split));
  os.write(reinterpret_cast<const char*>(matrix.data()),
           static_cast<std::streamsize>(matrix.size() * sizeof(float)));
  std::vector<std::int32_t> table(ids.begin(), ids.end());
  os.write(reinterpret_cast<const char*>(table.data()),
           static_cast<std::streamsize>(table.size() * sizeof(std::int32_t)));
  if (!os) throw DataError("failed writing embeddings '" + path + "'");
}

EmbeddingSet EmbeddingSet::Load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open embeddings '" + path + "'");
  char magic[sizeof(kEmbeddingMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kEmbeddingMagic, sizeof(magic)) != 0) {
    throw DataError("'" + path + "' is not an LPN embedding file");
  }
  if (const auto v = io::ReadU32(is); v != kEmbeddingVersion) {
    throw DataError("unsupported embedding version " + std::to_string(v));
  }
  EmbeddingSet set;
  const std::uint64_t n = io::ReadU64(is);
  const std::uint64_t d = io::ReadU64(is);
  if (n > static_cast<std::uint64_t>(std::numeric_limits<int>::max()) ||
      d > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
    throw DataError("embedding file '" + path + "' has implausible dimensions");
  }
  set.rows = static_cast<int>(n);
  set.cols = static_cast<int>(d);
  if (io::ReadU32(is) != kFloat32) throw DataError("unsupported embedding dtype");
  set.num_parts = static_cast<int>(io::ReadU32(is));
  set.platform = PlatformFromIndex(static_cast<int>(io::ReadU32(is)));
  const std::uint32_t split = io::ReadU32(is);
  if (split > static_cast<std::uint32_t>(Split::kGallery)) throw DataError("bad split tag");
  set.split = static_cast<Split>(split);
  set.matrix.resize(n * d);
  std::vector<std::int32_t> table(n);
  if (!is.read(reinterpret_cast<char*>(set.matrix.data()),
               static_cast<std::streamsize>(set.matrix.size() * sizeof(float))) ||
      !is.read(reinterpret_cast<char*>(table.data()),
               static_cast<std::streamsize>(table.size() * sizeof(std::int32_t)))) {
    throw DataError("truncated embedding file '" + path + "'");
  }
  set.ids.assign(table.begin(), table.end());
  set.Validate();
  return set;
}

void EmbeddingSet::WriteCsv(std::ostream& os) const {
  os << "id";
  for (int c = 0; c < cols; ++c) os << ",v" << c;
  os << '\n';
  const auto precision = os.precision(9);
  for (int r = 0; r < rows; ++r) {
    os << ids[r];
    for (float v : row(r)) os << ',' << v;
    os << '\n';
  }
  os.precision(precision);
}

// ---------------------------------------------------------------------------
// Ranking and metrics

RankingResult Rank(const EmbeddingSet& queries, const EmbeddingSet& gallery) {
  if (queries.cols != gallery.cols) {
    throw DataError("embedding dimension mismatch: queries " + std::to_string(queries.cols) +
                      ", gallery " + std::to_string(gallery.cols));
  }
  RankingResult result;
  result.gallery_size = gallery.rows;
  result.order.resize(queries.rows);
  result.relevant.resize(queries.rows);
  std::vector<double> dist(gallery.rows);
  for (int q = 0; q < queries.rows; ++q) {
    const auto qrow = queries.row(q);
    for (int g = 0; g < gallery.rows; ++g) dist[g] = SquaredDistance(qrow, gallery.row(g));
    auto& order = result.order[q];
    order.resize(gallery.rows);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });
    auto& rel = result.relevant[q];
    rel.resize(gallery.rows);
    for (int i = 0; i < gallery.rows; ++i) rel[i] = gallery.ids[order[i]] == queries.ids[q];
  }
  return result;
}

double RecallAtK(const RankingResult& ranking, int k) {
  if (k < 1) throw ConfigError("recall cutoff must be >= 1");
  if (ranking.relevant.empty()) return 0.0;
  const int cutoff = std::min(k, ranking.gallery_size);
  int hits = 0;
  for (const auto& rel : ranking.relevant) {
    hits += std::any_of(rel.begin(), rel.begin() + cutoff, [](char r) { return r != 0; });
  }
  return static_cast<double>(hits) / static_cast<double>(ranking.relevant.size());
}

ApResult AveragePrecision(const RankingResult& ranking) {
  ApResult result;
  double sum = 0.0;
  int included = 0;
  for (const auto& rel : ranking.relevant) {
    double ap = 0.0;
    int found = 0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
      if (!rel[i]) continue;
      ++found;
      ap += static_cast<double>(found) / static_cast<double>(i + 1);
    }
    if (found == 0) {
      result.per_query.push_back(std::numeric_limits<double>::quiet_NaN());
      ++result.excluded;
      continue;
    }
    ap /= found;
    result.per_query.push_back(ap);
    sum += ap;
    ++included;
  }
  result.mean = included ? sum / included : 0.0;
  return result;
}

int Top1PercentK(int gallery_size) {
  return std::max(1, static_cast<int>(std::ceil(0.01 * gallery_size)));
}

Metrics ComputeMetrics(const RankingResult& ranking) {
  Metrics m;
  m.queries = static_cast<int>(ranking.relevant.size());
  if (m.queries == 0 || ranking.gallery_size == 0) return m;
  m.r1 = RecallAtK(ranking, 1);
  m.r5 = RecallAtK(ranking, 5);
  m.r10 = RecallAtK(ranking, 10);
  m.r_top1pct = RecallAtK(ranking, Top1PercentK(ranking.gallery_size));
  const ApResult ap = AveragePrecision(ranking);
  m.ap = ap.mean;
  m.excluded = ap.excluded;
  return m;
}

Metrics Evaluate(const EmbeddingSet& queries, const EmbeddingSet& gallery) {
  return ComputeMetrics(Rank(queries, gallery));
}

void WriteMetricReport(std::ostream& os, std::span<const MetricRow> rows) {
  os << "# top1pct_rounding=ceil\n";
  os << "task,transform,param,R@1,R@5,R@10,R@top1pct,AP\n";
  const auto precision = os.precision(6);
  const auto flags = os.flags();
  os.setf(std::ios::fixed, std::ios::floatfield);
  for (const auto& r : rows) {
    const Metrics& m = r.metrics;
    os << r.task << ',' << r.transform << ',' << r.param << ',' << m.r1 << ',' << m.r5 << ','
       << m.r10 << ',' << m.r_top1pct << ',' << m.ap << '\n';
  }
  os.flags(flags);
  os.precision(precision);
}

// ---------------------------------------------------------------------------
// Extraction and probes

EmbeddingSet EmbedImages(Model& model, std::span<const Tensor> images, std::span<const int> ids,
                         Platform platform, Split split, int batch_size) {
  if (images.size() != ids.size()) throw DataError("image/id count mismatch");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  EmbeddingSet set;
  set.rows = static_cast<int>(images.size());
  set.cols = model.descriptor_dim();
  set.num_parts = model.num_parts();
  set.platform = platform;
  set.split = split;
  set.ids.assign(ids.begin(), ids.end());
  set.matrix.resize(static_cast<std::size_t>(set.rows) * set.cols);
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t end = std::min(images.size(), start + batch_size);
    const Tensor emb = model.EmbedBatch(Stack(images.subspan(start, end - start)), platform);
    std::copy(emb.data(), emb.data() + emb.size(), set.matrix.data() + start * set.cols);
  }
  set.Validate();
  return set;
}

EmbeddingSet EmbedManifest(Model& model, const DatasetManifest& manifest, int batch_size) {
  const auto images = LoadManifestImages(manifest, model.config().input_size);
  const auto ids = manifest.Labels();
  return EmbedImages(model, images, ids, manifest.platform, manifest.split, batch_size);
}

std::vector<ProbeResult> ProbeRotation(Model& model, std::span<const Tensor> query_images,
                                       std::span<const int> query_ids, Platform query_platform,
                                       const EmbeddingSet& gallery,
                                       std::span<const double> angles) {
  return RunProbe(model, query_images, query_ids, query_platform, gallery, angles,
                  [](const Tensor& img, double deg) { return RotateImage(img, deg); });
}

std::vector<ProbeResult> ProbeShift(Model& model, std::span<const Tensor> query_images,
                                    std::span<const int> query_ids, Platform query_platform,
                                    const EmbeddingSet& gallery, std::span<const int> pixels) {
  for (int p : pixels) {
    if (p < 0) throw ConfigError("shift must be non-negative, got " + std::to_string(p));
  }
  const std::vector<double> params(pixels.begin(), pixels.end());
  return RunProbe(model, query_images, query_ids, query_platform, gallery, params,
                  [](const Tensor& img, double px) {
                    return ShiftImage(img, static_cast<int>(px));
                  });
}

Metrics ProbePartCombination(const EmbeddingSet& queries, const EmbeddingSet& gallery,
                             std::span<const int> query_parts, std::span<const int> gallery_parts) {
  if (query_parts.size() != gallery_parts.size()) {
    throw ConfigError("query and gallery part sets differ in size (" +
                      std::to_string(query_parts.size()) + " vs " +
                      std::to_string(gallery_parts.size()) + ")");
  }
  return Evaluate(queries.SelectParts(query_parts), gallery.SelectParts(gallery_parts));
}

EmbeddingSet InjectDistractors(const EmbeddingSet& gallery, const EmbeddingSet& extra) {
  if (extra.rows == 0) return gallery;
  if (extra.cols != gallery.cols) {
    throw DataError("distractor dimension " + std::to_string(extra.cols) +
                      " does not match gallery dimension " + std::to_string(gallery.cols));
  }
  EmbeddingSet out = gallery;
  out.rows += extra.rows;
  out.matrix.insert(out.matrix.end(), extra.matrix.begin(), extra.matrix.end());
  out.ids.insert(out.ids.end(), static_cast<std::size_t>(extra.rows), kDistractorLabel);
  return out;
}

}  // namespace lpn
