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
#include "lpn/image_ops.h"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "lpn/errors.h"

namespace lpn {
namespace {

void CheckImage(const Tensor& image) {
  if (image.ndim() != 3 || image.dim(0) != 3) {
    throw ConfigError("expected a [3, H, W] image, got " + image.ShapeString());
  }
}

// Planar [3, H, W] -> interleaved CV_32FC3 and back.
cv::Mat ToMat(const Tensor& image) {
  const int h = image.dim(1), w = image.dim(2);
  std::vector<cv::Mat> planes;
  for (int c = 0; c < 3; ++c) {
    planes.emplace_back(h, w, CV_32F,
                        const_cast<float*>(image.data()) + static_cast<std::size_t>(c) * h * w);
  }
  cv::Mat merged;
  cv::merge(planes, merged);
  return merged;
}

Tensor FromMat(const cv::Mat& mat) {
  const int h = mat.rows, w = mat.cols;
  Tensor out({3, h, w});
  std::vector<cv::Mat> planes;
  for (int c = 0; c < 3; ++c) {
    planes.emplace_back(h, w, CV_32F, out.data() + static_cast<std::size_t>(c) * h * w);
  }
  cv::split(mat, planes);
  return out;
}

}  // namespace

Tensor RotateImage(const Tensor& image, double degrees) {
  CheckImage(image);
  double angle = std::fmod(degrees, 360.0);
  if (angle < 0) angle += 360.0;
  if (angle == 0.0) return image;
  const int h = image.dim(1), w = image.dim(2);
  const double quarter = angle / 90.0;
  if (h == w && quarter == std::floor(quarter)) {
    Tensor out(image.shape());
    const int turns = static_cast<int>(quarter);
    for (int c = 0; c < 3; ++c) {
      const float* src = image.data() + static_cast<std::size_t>(c) * h * w;
      float* dst = out.data() + static_cast<std::size_t>(c) * h * w;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          // Counter-clockwise: destination (y, x) reads the source pixel
          // that lands there after `turns` quarter turns.
          int sy = y, sx = x;
          switch (turns) {
            case 1: sy = x; sx = w - 1 - y; break;
            case 2: sy = h - 1 - y; sx = w - 1 - x; break;
            case 3: sy = h - 1 - x; sx = y; break;
          }
          dst[y * w + x] = src[sy * w + sx];
        }
      }
    }
    return out;
  }
  const cv::Point2f center(static_cast<float>(w - 1) / 2.0f, static_cast<float>(h - 1) / 2.0f);
  const cv::Mat rotation = cv::getRotationMatrix2D(center, angle, 1.0);
  Tensor out(image.shape());
  for (int c = 0; c < 3; ++c) {
    const std::size_t offset = static_cast<std::size_t>(c) * h * w;
    const cv::Mat src(h, w, CV_32F, const_cast<float*>(image.data()) + offset);
    cv::Mat dst(h, w, CV_32F, out.data() + offset);
    cv::warpAffine(src, dst, rotation, cv::Size(w, h), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
  }
  return out;
}

Tensor ShiftImage(const Tensor& image, int pixels) {
  CheckImage(image);
  if (pixels < 0) throw ConfigError("shift must be non-negative");
  if (pixels == 0) return image;
  const int h = image.dim(1), w = image.dim(2);
  if (pixels >= w) throw ConfigError("shift must be smaller than the image width");
  Tensor out(image.shape());
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      const float* src = image.data() + (static_cast<std::size_t>(c) * h + y) * w;
      float* dst = out.data() + (static_cast<std::size_t>(c) * h + y) * w;
      for (int x = 0; x < w; ++x) {
        const int sx = x - pixels;
        dst[x] = src[sx >= 0 ? sx : -sx];  // reflect without repeating the edge
      }
    }
  }
  return out;
}

Tensor PadCrop(const Tensor& image, int pad, int top, int left) {
  CheckImage(image);
  if (pad < 0 || top < 0 || left < 0 || top > 2 * pad || left > 2 * pad) {
    throw ConfigError("crop offset outside the padded image");
  }
  const int h = image.dim(1), w = image.dim(2);
  if (pad >= h || pad >= w) throw ConfigError("padding must be smaller than the image");
  auto reflect = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * (n - 1) - i : i); };
  Tensor out(image.shape());
  for (int c = 0; c < 3; ++c) {
    const float* src = image.data() + static_cast<std::size_t>(c) * h * w;
    float* dst = out.data() + static_cast<std::size_t>(c) * h * w;
    const int shift = left - pad;
    const int lo = std::max(0, -shift), hi = std::min(w, w - shift);  // in-range columns
    for (int y = 0; y < h; ++y) {
      const float* row = src + reflect(y + top - pad, h) * w;
      float* out_row = dst + y * w;
      for (int x = 0; x < lo; ++x) out_row[x] = row[reflect(x + shift, w)];
      std::copy(row + lo + shift, row + hi + shift, out_row + lo);
      for (int x = hi; x < w; ++x) out_row[x] = row[reflect(x + shift, w)];
    }
  }
  return out;
}

Tensor FlipHorizontal(const Tensor& image) {
  CheckImage(image);
  const int h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  for (int row = 0; row < 3 * h; ++row) {
    const float* src = image.data() + static_cast<std::size_t>(row) * w;
    float* dst = out.data() + static_cast<std::size_t>(row) * w;
    for (int x = 0; x < w; ++x) dst[x] = src[w - 1 - x];
  }
  return out;
}

Tensor ResizeImage(const Tensor& image, int size) {
  CheckImage(image);
  if (size < 1) throw ConfigError("resize target must be positive");
  if (image.dim(1) == size && image.dim(2) == size) return image;
  const bool shrink = image.dim(1) > size || image.dim(2) > size;
  cv::Mat resized;
  cv::resize(ToMat(image), resized, cv::Size(size, size), 0, 0,
             shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
  return FromMat(resized);
}

}  // namespace lpn
