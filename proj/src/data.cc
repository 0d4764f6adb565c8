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
#include "lpn/data.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "lpn/config.h"
#include "lpn/errors.h"
#include "lpn/image_ops.h"
#include "lpn/seed.h"

namespace fs = std::filesystem;

namespace lpn {
namespace {

bool IsImageFile(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".ppm" ||
         ext == ".tif" || ext == ".tiff" || ext == ".webp";
}

std::string NormalizeRoot(const std::string& root) {
  std::string r = fs::path(root).lexically_normal().string();
  while (r.size() > 1 && r.back() == '/') r.pop_back();
  return r;
}

bool TryParsePlatform(std::string_view name, Platform& out) {
  try {
    out = ParsePlatform(name);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// Synthetic scenes

enum class Shape { kCircle, kSquare, kTriangle, kDiamond, kCross };
constexpr int kNumShapes = 5;

// RGB in [0, 1].
constexpr float kObjectColors[][3] = {
    {0.90f, 0.15f, 0.15f}, {0.15f, 0.75f, 0.20f}, {0.15f, 0.30f, 0.90f}, {0.95f, 0.85f, 0.10f},
    {0.85f, 0.20f, 0.85f}, {0.10f, 0.85f, 0.85f}, {0.95f, 0.55f, 0.10f}, {0.95f, 0.95f, 0.95f},
};
constexpr float kBackgrounds[][3] = {
    {0.35f, 0.35f, 0.35f}, {0.45f, 0.40f, 0.30f}, {0.30f, 0.40f, 0.30f}, {0.33f, 0.33f, 0.45f},
};
constexpr int kNumColors = sizeof(kObjectColors) / sizeof(kObjectColors[0]);
constexpr int kNumBackgrounds = sizeof(kBackgrounds) / sizeof(kBackgrounds[0]);

struct SceneObject {
  Shape shape;
  int color;
  double size;         // circumradius, pixels
  double radius;       // distance from the scene center
  double angle;        // polar angle of the position
  double orientation;  // rotation of the shape itself
};

struct Scene {
  int background;
  std::vector<SceneObject> objects;  // objects[0] is the central target
};

struct ViewTransform {
  double rotation = 0.0;  // degrees, counter-clockwise
  double scale = 1.0;
  double dx = 0.0, dy = 0.0;
};

struct GroupPalette {
  int background;
  std::vector<SceneObject> objects;  // shape/color/size only
};

GroupPalette MakePalette(const SyntheticSceneSpec& spec, std::uint64_t stream, int group) {
  std::mt19937_64 rng(DeriveSeed(spec.seed, stream, static_cast<std::uint64_t>(group)));
  GroupPalette palette;
  palette.background = std::uniform_int_distribution<int>(0, kNumBackgrounds - 1)(rng);
  const int count =
      1 + std::uniform_int_distribution<int>(spec.min_context, spec.max_context)(rng);
  std::vector<int> kinds(kNumShapes * kNumColors);
  std::iota(kinds.begin(), kinds.end(), 0);
  std::shuffle(kinds.begin(), kinds.end(), rng);
  std::uniform_real_distribution<double> size(18.0, 24.0);
  for (int i = 0; i < count; ++i) {
    SceneObject o{};
    o.shape = static_cast<Shape>(kinds[i] % kNumShapes);
    o.color = kinds[i] / kNumShapes;
    o.size = size(rng);
    palette.objects.push_back(o);
  }
  return palette;
}

// Member `member` of a group puts palette object `member % count` in the
// center and scatters the rest at random radii and angles.
Scene MakeScene(const SyntheticSceneSpec& spec, const GroupPalette& palette, std::uint64_t stream,
                int scene_index, int member) {
  std::mt19937_64 rng(DeriveSeed(spec.seed, stream + 100, static_cast<std::uint64_t>(scene_index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double half = spec.image_size / 2.0;
  const double min_r = 0.34 * half, max_r = 0.88 * half;
  Scene scene;
  scene.background = palette.background;
  const int count = static_cast<int>(palette.objects.size());
  const int center = member % count;
  scene.objects.push_back(palette.objects[center]);
  scene.objects.back().orientation = unit(rng) * 2.0 * std::numbers::pi;
  for (int i = 0; i < count; ++i) {
    if (i == center) continue;
    SceneObject o = palette.objects[i];
    o.radius = min_r + (max_r - min_r) * unit(rng);
    o.angle = unit(rng) * 2.0 * std::numbers::pi;
    o.orientation = unit(rng) * 2.0 * std::numbers::pi;
    scene.objects.push_back(o);
  }
  for (auto& o : scene.objects) o.size *= spec.image_size / 256.0;
  return scene;
}

std::vector<cv::Point2d> ShapeOutline(Shape shape, double size, double orientation) {
  std::vector<cv::Point2d> unit;
  switch (shape) {
    case Shape::kSquare:
      for (int k = 0; k < 4; ++k) unit.emplace_back(std::cos(k * std::numbers::pi / 2 + std::numbers::pi / 4), std::sin(k * std::numbers::pi / 2 + std::numbers::pi / 4));
      break;
    case Shape::kTriangle:
      for (int k = 0; k < 3; ++k) unit.emplace_back(std::cos(k * 2 * std::numbers::pi / 3), std::sin(k * 2 * std::numbers::pi / 3));
      break;
    case Shape::kDiamond:
      unit = {{1.0, 0.0}, {0.0, 0.55}, {-1.0, 0.0}, {0.0, -0.55}};
      break;
    case Shape::kCross: {
      const double a = 1.0, b = 0.33;
      unit = {{b, a}, {-b, a}, {-b, b}, {-a, b}, {-a, -b}, {-b, -b},
              {-b, -a}, {b, -a}, {b, -b}, {a, -b}, {a, b}, {b, b}};
      break;
    }
    case Shape::kCircle:
      break;
  }
  const double c = std::cos(orientation), s = std::sin(orientation);
  for (auto& p : unit) p = cv::Point2d(size * (c * p.x - s * p.y), size * (s * p.x + c * p.y));
  return unit;
}

cv::Mat RenderView(const Scene& scene, const ViewTransform& view, int size, std::uint64_t noise_seed) {
  constexpr int kShift = 4;
  constexpr double kFixed = 1 << kShift;
  const float* bg = kBackgrounds[scene.background];
  cv::Mat img(size, size, CV_8UC3,
              cv::Scalar(bg[2] * 255.0, bg[1] * 255.0, bg[0] * 255.0));
  const double theta = view.rotation * std::numbers::pi / 180.0;
  // Image y grows downward, so a counter-clockwise view rotation is -theta.
  const double c = std::cos(theta), s = std::sin(theta);
  const double center = (size - 1) / 2.0;
  for (const auto& o : scene.objects) {
    const double px = o.radius * std::cos(o.angle), py = o.radius * std::sin(o.angle);
    const double x = center + view.scale * (c * px + s * py) + view.dx;
    const double y = center + view.scale * (-s * px + c * py) + view.dy;
    const float* rgb = kObjectColors[o.color];
    const cv::Scalar color(rgb[2] * 255.0, rgb[1] * 255.0, rgb[0] * 255.0);
    if (o.shape == Shape::kCircle) {
      cv::circle(img, cv::Point(static_cast<int>(std::lround(x * kFixed)), static_cast<int>(std::lround(y * kFixed))),
                 static_cast<int>(std::lround(o.size * view.scale * kFixed)), color, cv::FILLED,
                 cv::LINE_AA, kShift);
      continue;
    }
    std::vector<cv::Point> poly;
    for (const auto& p : ShapeOutline(o.shape, o.size * view.scale, o.orientation - theta)) {
      poly.emplace_back(static_cast<int>(std::lround((x + p.x) * kFixed)),
                        static_cast<int>(std::lround((y + p.y) * kFixed)));
    }
    cv::fillPoly(img, std::vector<std::vector<cv::Point>>{poly}, color, cv::LINE_AA, kShift);
  }
  cv::Mat noise(size, size, CV_16SC3);
  cv::RNG noise_rng(noise_seed);
  noise_rng.fill(noise, cv::RNG::NORMAL, 0.0, 6.0);
  cv::Mat out;
  cv::add(img, noise, out, cv::noArray(), CV_8UC3);
  return out;
}

ViewTransform SampleView(std::mt19937_64& rng, double rotation, double min_scale,
                         double max_scale, double translation) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ViewTransform v;
  v.rotation = rotation > 0 ? (2.0 * unit(rng) - 1.0) * rotation : 0.0;
  v.scale = min_scale + (max_scale - min_scale) * unit(rng);
  if (translation > 0) {
    v.dx = (2.0 * unit(rng) - 1.0) * translation;
    v.dy = (2.0 * unit(rng) - 1.0) * translation;
  }
  return v;
}

void WritePng(const fs::path& path, const cv::Mat& img) {
  fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) throw DataError("cannot write image '" + path.string() + "'");
}

std::string ClassDirName(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", index);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kQuery: return "query";
    case Split::kGallery: return "gallery";
  }
  return "unknown";
}

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "query") return Split::kQuery;
  if (name == "gallery") return Split::kGallery;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

std::string DatasetManifest::FullPath(const ManifestEntry& e) const {
  return (fs::path(root) / e.path).string();
}

int DatasetManifest::NumClasses() const {
  int c = 0;
  for (const auto& e : entries) c = std::max(c, e.class_id);
  return c;
}

std::vector<int> DatasetManifest::Labels() const {
  std::vector<int> labels;
  labels.reserve(entries.size());
  for (const auto& e : entries) labels.push_back(e.class_id);
  return labels;
}

void DatasetManifest::WriteCsv(std::ostream& os) const {
  os << "path,class_id,platform,split,class_name\n";
  for (const auto& e : entries) {
    os << e.path << ',' << e.class_id << ',' << PlatformName(platform) << ',' << SplitName(split)
       << ',' << e.class_name << '\n';
  }
}

DatasetManifest DatasetManifest::ReadCsv(std::istream& is, const std::string& root) {
  DatasetManifest m;
  m.root = root;
  std::string line;
  int line_no = 0;
  bool first_row = true;
  while (std::getline(is, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const auto cols = SplitString(line, ',');
    if (line_no == 1 && !cols.empty() && cols[0] == "path") continue;
    if (cols.size() < 4) {
      throw DataError("manifest line " + std::to_string(line_no) + ": expected at least 4 columns");
    }
    ManifestEntry e;
    e.path = cols[0];
    try {
      e.class_id = std::stoi(cols[1]);
    } catch (const std::logic_error&) {
      throw DataError("manifest line " + std::to_string(line_no) + ": bad class id '" + cols[1] + "'");
    }
    e.class_name = cols.size() > 4 ? cols[4] : cols[1];
    const Platform platform = ParsePlatform(cols[2]);
    const Split split = ParseSplit(cols[3]);
    if (first_row) {
      m.platform = platform;
      m.split = split;
      first_row = false;
    } else if (platform != m.platform || split != m.split) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": mixes platforms or splits within one manifest");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::vector<DatasetManifest> ScanUniversityLayout(const std::string& root_in, const Warning& warn) {
  const std::string root = NormalizeRoot(root_in);
  if (!fs::is_directory(root)) throw DataError("dataset root '" + root + "' is not a directory");
  auto report = [&](const std::string& msg) {
    if (warn) warn(msg);
  };

  // (split, platform) -> class name -> relative image paths
  std::map<std::pair<Split, Platform>, std::map<std::string, std::vector<std::string>>> found;

  auto scan_platform_dir = [&](const fs::path& dir, Split split, Platform platform) {
    auto& classes = found[{split, platform}];
    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory()) class_dirs.push_back(entry.path());
    }
    for (const auto& class_dir : class_dirs) {
      std::vector<std::string> files;
      for (const auto& f : fs::directory_iterator(class_dir)) {
        if (f.is_regular_file() && IsImageFile(f.path())) {
          files.push_back(fs::relative(f.path(), root).string());
        }
      }
      if (files.empty()) {
        report("skipping empty class directory '" + class_dir.string() + "'");
        continue;
      }
      std::sort(files.begin(), files.end());
      classes[class_dir.filename().string()] = std::move(files);
    }
    if (classes.empty()) {
      report("ignoring platform directory without images '" + dir.string() + "'");
      found.erase({split, platform});
    }
  };

  for (const auto& top : fs::directory_iterator(root)) {
    if (!top.is_directory()) continue;
    const std::string name = top.path().filename().string();
    if (name == "train" || name == "query" || name == "gallery") {
      const Split split = ParseSplit(name);
      for (const auto& pdir : fs::directory_iterator(top.path())) {
        if (!pdir.is_directory()) continue;
        Platform platform;
        if (!TryParsePlatform(pdir.path().filename().string(), platform)) {
          report("ignoring unknown platform directory '" + pdir.path().string() + "'");
          continue;
        }
        scan_platform_dir(pdir.path(), split, platform);
      }
    } else if (name == "test") {
      for (const auto& pdir : fs::directory_iterator(top.path())) {
        if (!pdir.is_directory()) continue;
        const std::string sub = pdir.path().filename().string();
        const auto underscore = sub.find('_');
        Platform platform;
        if (underscore == std::string::npos ||
            (sub.substr(0, underscore) != "query" && sub.substr(0, underscore) != "gallery") ||
            !TryParsePlatform(sub.substr(underscore + 1), platform)) {
          report("ignoring test directory '" + pdir.path().string() + "'");
          continue;
        }
        scan_platform_dir(pdir.path(), ParseSplit(sub.substr(0, underscore)), platform);
      }
    }
  }

  // Train platforms must agree on the class set.
  const std::set<std::string>* train_classes = nullptr;
  std::map<Platform, std::set<std::string>> train_sets;
  for (const auto& [key, classes] : found) {
    if (key.first != Split::kTrain) continue;
    auto& s = train_sets[key.second];
    for (const auto& [name, files] : classes) s.insert(name);
  }
  for (const auto& [platform, classes] : train_sets) {
    if (train_classes == nullptr) {
      train_classes = &classes;
      continue;
    }
    if (classes != *train_classes) {
      std::vector<std::string> diff;
      std::set_symmetric_difference(classes.begin(), classes.end(), train_classes->begin(),
                                    train_classes->end(), std::back_inserter(diff));
      throw DataError("train platforms disagree on the class set (e.g. class '" + diff.front() +
                      "' is missing from '" + std::string(PlatformName(platform)) +
                      "' or another platform)");
    }
  }

  std::map<std::string, int> train_ids, test_ids;
  if (train_classes != nullptr) {
    int id = 0;
    for (const auto& name : *train_classes) train_ids[name] = ++id;
  }
  {
    std::set<std::string> names;
    for (const auto& [key, classes] : found) {
      if (key.first == Split::kTrain) continue;
      for (const auto& [name, files] : classes) names.insert(name);
    }
    int id = 0;
    for (const auto& name : names) test_ids[name] = ++id;
  }

  std::vector<DatasetManifest> manifests;
  for (const auto& [key, classes] : found) {
    if (classes.empty()) continue;
    DatasetManifest m;
    m.root = root;
    m.split = key.first;
    m.platform = key.second;
    const auto& ids = key.first == Split::kTrain ? train_ids : test_ids;
    for (const auto& [name, files] : classes) {
      for (const auto& f : files) m.entries.push_back({f, ids.at(name), name});
    }
    manifests.push_back(std::move(m));
  }
  return manifests;
}

std::pair<DatasetManifest, DatasetManifest> ScanPairsLayout(const std::string& list_file,
                                                            Split split,
                                                            const std::string& root_in) {
  std::ifstream is(list_file);
  if (!is) throw DataError("cannot open pair list '" + list_file + "'");
  const std::string root =
      NormalizeRoot(root_in.empty() ? fs::path(list_file).parent_path().string() : root_in);
  DatasetManifest ground, satellite;
  ground.root = satellite.root = root.empty() ? "." : root;
  ground.split = satellite.split = split;
  ground.platform = Platform::kGround;
  satellite.platform = Platform::kSatellite;

  std::map<std::pair<std::string, std::string>, int> seen;
  std::vector<std::string> missing;
  std::string line;
  int line_no = 0;
  int id = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string trimmed = Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto cols = SplitString(trimmed, ',');
    if (cols.size() < 2 || cols[0].empty() || cols[1].empty()) {
      throw DataError(list_file + ":" + std::to_string(line_no) +
                      ": expected 'ground_path,satellite_path'");
    }
    const auto key = std::make_pair(cols[0], cols[1]);
    if (const auto it = seen.find(key); it != seen.end()) {
      throw DataError(list_file + ":" + std::to_string(line_no) + ": duplicate pair '" + cols[0] +
                      "," + cols[1] + "' (first seen on line " + std::to_string(it->second) + ")");
    }
    seen[key] = line_no;
    for (const auto& rel : {cols[0], cols[1]}) {
      if (!fs::is_regular_file(fs::path(ground.root) / rel)) missing.push_back(rel);
    }
    ++id;
    ground.entries.push_back({cols[0], id, std::to_string(id)});
    satellite.entries.push_back({cols[1], id, std::to_string(id)});
  }
  if (!missing.empty()) {
    std::string msg = "pair list '" + list_file + "' references " +
                      std::to_string(missing.size()) + " missing file(s):";
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }
  return {std::move(ground), std::move(satellite)};
}

const DatasetManifest* FindManifest(const std::vector<DatasetManifest>& manifests, Split split,
                                    Platform platform) {
  for (const auto& m : manifests) {
    if (m.split == split && m.platform == platform) return &m;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

void SyntheticSceneSpec::Validate() const {
  if (num_classes < 2) throw ConfigError("synthetic num_classes must be >= 2");
  if (num_test_classes < 0) throw ConfigError("synthetic num_test_classes must be >= 0");
  if (image_size < 16) throw ConfigError("synthetic image_size must be >= 16");
  if (drone_views < 1) throw ConfigError("synthetic drone_views must be >= 1");
  if (min_context < 0 || max_context < min_context) {
    throw ConfigError("synthetic context object range is empty");
  }
  if (max_context + 1 > kNumShapes * kNumColors) {
    throw ConfigError("synthetic max_context exceeds the palette size");
  }
  if (group_size < 1) throw ConfigError("synthetic group_size must be >= 1");
  if (!(min_scale > 0 && max_scale >= min_scale)) throw ConfigError("bad synthetic scale range");
  if (satellite_rotation < 0 || drone_rotation < 0 || max_translation < 0) {
    throw ConfigError("synthetic jitter ranges must be non-negative");
  }
}

std::vector<DatasetManifest> GenerateSynthetic(const SyntheticSceneSpec& spec,
                                               const std::string& out_root) {
  spec.Validate();
  const std::string root = NormalizeRoot(out_root);
  fs::create_directories(root);
  const fs::path base(root);

  auto make_manifest = [&](Split split, Platform platform) {
    DatasetManifest m;
    m.root = root;
    m.split = split;
    m.platform = platform;
    return m;
  };
  DatasetManifest train_sat = make_manifest(Split::kTrain, Platform::kSatellite);
  DatasetManifest train_drone = make_manifest(Split::kTrain, Platform::kDrone);
  DatasetManifest query_sat = make_manifest(Split::kQuery, Platform::kSatellite);
  DatasetManifest query_drone = make_manifest(Split::kQuery, Platform::kDrone);
  DatasetManifest gallery_sat = make_manifest(Split::kGallery, Platform::kSatellite);
  DatasetManifest gallery_drone = make_manifest(Split::kGallery, Platform::kDrone);

  // Stream 1 renders training scenes, stream 2 held-out scenes.
  auto render_class = [&](std::uint64_t stream, int scene_index, int class_id,
                          const std::string& class_name, const std::vector<Split>& splits) {
    const int group = scene_index / spec.group_size;
    const GroupPalette palette = MakePalette(spec, stream, group);
    const Scene scene = MakeScene(spec, palette, stream, scene_index, scene_index % spec.group_size);
    std::mt19937_64 rng(DeriveSeed(spec.seed, stream + 200, static_cast<std::uint64_t>(scene_index)));
    const ViewTransform sat_view = SampleView(rng, spec.satellite_rotation, 1.0, 1.0, 0.0);
    const cv::Mat sat = RenderView(scene, sat_view, spec.image_size, rng());
    const std::string sat_file = class_name + "_satellite.png";
    std::vector<std::pair<std::string, cv::Mat>> drones;
    for (int v = 0; v < spec.drone_views; ++v) {
      const ViewTransform view = SampleView(rng, spec.drone_rotation, spec.min_scale,
                                            spec.max_scale, spec.max_translation);
      char name[64];
      std::snprintf(name, sizeof(name), "%s_drone_%02d.png", class_name.c_str(), v + 1);
      drones.emplace_back(name, RenderView(scene, view, spec.image_size, rng()));
    }
    for (Split split : splits) {
      const std::string split_dir(SplitName(split));
      const fs::path sat_rel = fs::path(split_dir) / "satellite" / class_name / sat_file;
      WritePng(base / sat_rel, sat);
      auto& sat_manifest =
          split == Split::kTrain ? train_sat : (split == Split::kQuery ? query_sat : gallery_sat);
      sat_manifest.entries.push_back({sat_rel.string(), class_id, class_name});
      auto& drone_manifest = split == Split::kTrain
                                 ? train_drone
                                 : (split == Split::kQuery ? query_drone : gallery_drone);
      for (const auto& [file, img] : drones) {
        const fs::path rel = fs::path(split_dir) / "drone" / class_name / file;
        WritePng(base / rel, img);
        drone_manifest.entries.push_back({rel.string(), class_id, class_name});
      }
    }
  };

  for (int c = 0; c < spec.num_classes; ++c) {
    render_class(1, c, c + 1, ClassDirName(c + 1), {Split::kTrain});
  }
  for (int c = 0; c < spec.test_classes(); ++c) {
    render_class(2, c, c + 1, ClassDirName(spec.num_classes + c + 1),
                 {Split::kQuery, Split::kGallery});
  }
  return {std::move(train_sat), std::move(train_drone), std::move(query_sat),
          std::move(query_drone), std::move(gallery_sat), std::move(gallery_drone)};
}

// ---------------------------------------------------------------------------

Tensor LoadImage(const std::string& path, int size) {
  if (!fs::is_regular_file(path)) throw DataError("image file '" + path + "' does not exist");
  const cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("cannot decode image '" + path + "' (unsupported format?)");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (rgb.rows != size || rgb.cols != size) {
    cv::Mat resized;
    const bool shrink = rgb.rows > size || rgb.cols > size;
    cv::resize(rgb, resized, cv::Size(size, size), 0, 0, shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
    rgb = resized;
  }
  Tensor out({3, size, size});
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  for (int y = 0; y < size; ++y) {
    const auto* row = rgb.ptr<cv::Vec3b>(y);
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        out[c * plane + static_cast<std::size_t>(y) * size + x] = row[x][c] / 255.0f;
      }
    }
  }
  return out;
}

void SaveImage(const std::string& path, const Tensor& image) {
  if (image.ndim() != 3 || image.dim(0) != 3) throw ConfigError("SaveImage expects [3, H, W]");
  const int h = image.dim(1), w = image.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  cv::Mat bgr(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = image[c * plane + static_cast<std::size_t>(y) * w + x];
        row[x][2 - c] = cv::saturate_cast<uchar>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
      }
    }
  }
  WritePng(path, bgr);
}

std::vector<Tensor> LoadManifestImages(const DatasetManifest& manifest, int size, int workers) {
  const std::size_t n = manifest.entries.size();
  std::vector<Tensor> images(n);
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      images[i] = LoadImage(manifest.FullPath(manifest.entries[i]), size);
    }
    return images;
  }
  // Strided slices; the first failure is rethrown after all workers join.
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) {
          images[i] = LoadImage(manifest.FullPath(manifest.entries[i]), size);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return images;
}

}  // namespace lpn
