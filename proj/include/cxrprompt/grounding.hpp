/*
 * Copyright 2026 The cxrprompt Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Visual grounding: ask a zero-shot detector where a condition shows up in an
// image, keep the single highest-scoring region and crop to it.

#include <filesystem>
#include <optional>
#include <span>
#include <string>

namespace cxrprompt {

class Detector;

// Pixel rectangle, half-open: [x0, x1) x [y0, y1).
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  [[nodiscard]] int width() const noexcept { return x1 - x0; }
  [[nodiscard]] int height() const noexcept { return y1 - y0; }
  friend bool operator==(const Box&, const Box&) = default;
};

struct Detection {
  Box box;
  double score = 0.0;

  void validate() const;
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundingQuery {
  std::string condition_text;
};

struct GroundedImage {
  std::string source_ref;
  std::optional<Box> box;  // absent when the original image passes through
  int padding_px = 0;
  std::string image_ref;
  bool grounding_miss = false;
};

struct GroundingOptions {
  int padding_px = 0;
  std::filesystem::path crop_dir = "crops";
};

// Highest score wins; ties go to the lowest index. Throws kNoDetections.
const Detection& select_region(std::span<const Detection> detections);

// Box grown by padding on every side and clamped to a width x height image.
// Throws kBoxOutsideImage when the box misses the image entirely.
Box padded_crop_rect(const Box& box, int padding_px, int width, int height);

GroundedImage crop(const std::string& image_ref, const Box& box, int padding_px,
                   const std::filesystem::path& crop_dir);

// With vg_enabled=false, or when the detector finds nothing, the original
// image passes through unchanged (the latter flagged as a grounding miss).
GroundedImage ground(const std::string& image_ref, const GroundingQuery& query,
                     const Detector* detector, bool vg_enabled, const GroundingOptions& options);

}  // namespace cxrprompt
