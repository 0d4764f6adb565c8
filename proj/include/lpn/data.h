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
#ifndef LPN_DATA_H_
#define LPN_DATA_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "lpn/model.h"
#include "lpn/tensor.h"

namespace lpn {

enum class Split { kTrain, kQuery, kGallery };

std::string_view SplitName(Split split);
Split ParseSplit(std::string_view name);

struct ManifestEntry {
  std::string path;        // relative to the manifest root
  int class_id = 0;        // dense, 1-based
  std::string class_name;  // original directory name / id string
};

struct DatasetManifest {
  std::string root;
  Split split = Split::kTrain;
  Platform platform = Platform::kSatellite;
  std::vector<ManifestEntry> entries;

  std::string FullPath(const ManifestEntry& e) const;
  // Highest class id referenced (the size of the label space for dense ids).
  int NumClasses() const;
  std::vector<int> Labels() const;

  // CSV with header `path,class_id,platform,split`. Paths are relative to
  // `root`; the class name is carried as an optional fifth column.
  void WriteCsv(std::ostream& os) const;
  static DatasetManifest ReadCsv(std::istream& is, const std::string& root);

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    if (a.root != b.root || a.split != b.split || a.platform != b.platform ||
        a.entries.size() != b.entries.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      const auto& x = a.entries[i];
      const auto& y = b.entries[i];
      if (x.path != y.path || x.class_id != y.class_id || x.class_name != y.class_name) {
        return false;
      }
    }
    return true;
  }
};

using Warning = std::function<void(const std::string&)>;

// Scans `<root>/<split>/<platform>/<class_dir>/<image>`. Split directories
// are train/query/gallery; a University-1652 `test/<split>_<platform>`
// directory is accepted as well. Returned manifests are sorted by
// (split, platform) and entries by (class, file).
//
// Class ids: train ids are dense over the (shared) train class set; query and
// gallery ids are dense over the union of their class names so the same name
// maps to the same id on both sides. Empty class directories are reported via
// `warn` and skipped. Throws DataError if train platforms disagree on the
// class set.
std::vector<DatasetManifest> ScanUniversityLayout(const std::string& root,
                                                  const Warning& warn = {});

// Each line of `list_file` holds `ground_path,satellite_path` (relative to
// `root`, which defaults to the list file's directory). Every pair becomes
// its own class. Returns {ground, satellite} manifests. Throws DataError on
// duplicate pairs or missing files (listing all offenders).
std::pair<DatasetManifest, DatasetManifest> ScanPairsLayout(const std::string& list_file,
                                                            Split split = Split::kTrain,
                                                            const std::string& root = "");

const DatasetManifest* FindManifest(const std::vector<DatasetManifest>& manifests, Split split,
                                    Platform platform);

struct SyntheticSceneSpec {
  int num_classes = 50;       // training scenes
  int num_test_classes = 0;   // held-out scenes for query/gallery; 0 = num_classes
  int image_size = 256;
  int drone_views = 4;
  int min_context = 3;        // context objects per scene
  int max_context = 6;
  // Consecutive scenes in a group reuse one object palette and background
  // and differ only in where each object sits.
  int group_size = 5;
  double satellite_rotation = 180.0;  // uniform in [-r, r] degrees
  double drone_rotation = 30.0;
  double min_scale = 0.8;  // drone scale jitter
  double max_scale = 1.2;
  double max_translation = 10.0;  // drone translation jitter, pixels
  std::uint64_t seed = 0;

  void Validate() const;
  int test_classes() const { return num_test_classes > 0 ? num_test_classes : num_classes; }
};

// Renders a University-style tree under `out_root`:
//   train/{satellite,drone}, query/{drone,satellite}, gallery/{satellite,drone}
// Class directories are zero-padded indices. Deterministic for a given spec.
std::vector<DatasetManifest> GenerateSynthetic(const SyntheticSceneSpec& spec,
                                               const std::string& out_root);

// Decodes an image file to [3, size, size] RGB in [0, 1]. Throws DataError
// on unreadable or undecodable files.
Tensor LoadImage(const std::string& path, int size);
void SaveImage(const std::string& path, const Tensor& image);

// Loads every entry of a manifest in order.
std::vector<Tensor> LoadManifestImages(const DatasetManifest& manifest, int size,
                                       int workers = 1);

}  // namespace lpn

#endif  // LPN_DATA_H_
