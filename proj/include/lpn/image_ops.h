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
#ifndef LPN_IMAGE_OPS_H_
#define LPN_IMAGE_OPS_H_

#include <random>

#include "lpn/tensor.h"

namespace lpn {

// All functions take and return [3, H, W] float images.

// Rotation about the image center, counter-clockwise in degrees. Multiples
// of 90 on square images are exact index permutations; other angles use
// bilinear sampling with reflected borders (equivalent to reflect-padding,
// rotating and center-cropping back to H x W).
Tensor RotateImage(const Tensor& image, double degrees);

// Reflect-pads `pixels` columns on the left and crops W columns left-aligned,
// moving the content right.
Tensor ShiftImage(const Tensor& image, int pixels);

// Reflect-pads every side by `pad` and crops H x W at (top, left) of the
// padded image; top/left in [0, 2 * pad].
Tensor PadCrop(const Tensor& image, int pad, int top, int left);

Tensor FlipHorizontal(const Tensor& image);

// Bilinear resize to size x size (area interpolation when shrinking).
Tensor ResizeImage(const Tensor& image, int size);

}  // namespace lpn

#endif  // LPN_IMAGE_OPS_H_
