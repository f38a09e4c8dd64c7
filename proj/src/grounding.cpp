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

#include "cxrprompt/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cxrprompt/backends.hpp"
#include "cxrprompt/core.hpp"
#include "cxrprompt/image.hpp"
#include "cxrprompt/log.hpp"
#include "cxrprompt/rng.hpp"

namespace cxrprompt {

void Detection::validate() const {
  if (box.x0 >= box.x1 || box.y0 >= box.y1) {
    throw Error(ErrorCode::kInvalidArgument, "detection box must satisfy x0 < x1 and y0 < y1");
  }
  if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "detection score outside [0, 1]");
  }
}

const Detection& select_region(std::span<const Detection> detections) {
  if (detections.empty()) throw Error(ErrorCode::kNoDetections, "detector returned no regions");
  std::size_t best = 0;
  for (std::size_t i = 1; i < detections.size(); ++i) {
    if (detections[i].score > detections[best].score) best = i;
  }
  return detections[best];
}

Box padded_crop_rect(const Box& box, int padding_px, int width, int height) {
  if (padding_px < 0) throw Error(ErrorCode::kInvalidArgument, "padding must be >= 0");
  if (box.x1 <= 0 || box.y1 <= 0 || box.x0 >= width || box.y0 >= height || box.x0 >= box.x1 ||
      box.y0 >= box.y1) {
    throw Error(ErrorCode::kBoxOutsideImage, "box does not intersect the image");
  }
  return Box{std::max(0, box.x0 - padding_px), std::max(0, box.y0 - padding_px),
             std::min(width, box.x1 + padding_px), std::min(height, box.y1 + padding_px)};
}

namespace {

std::filesystem::path crop_path(const std::string& image_ref, const Box& rect,
                                const std::filesystem::path& crop_dir) {
  char name[160];
  std::snprintf(name, sizeof(name), "%s_%016llx_%d_%d_%d_%d.pgm",
                std::filesystem::path(image_ref).stem().string().substr(0, 64).c_str(),
                static_cast<unsigned long long>(fnv1a(image_ref)), rect.x0, rect.y0, rect.x1,
                rect.y1);
  return crop_dir / name;
}

}  // namespace

GroundedImage crop(const std::string& image_ref, const Box& box, int padding_px,
                   const std::filesystem::path& crop_dir) {
  const GrayImage source = load_image(image_ref);
  const Box rect = padded_crop_rect(box, padding_px, source.width, source.height);

  GrayImage out;
  out.width = rect.width();
  out.height = rect.height();
  out.pixels.reserve(static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height));
  for (int y = rect.y0; y < rect.y1; ++y) {
    for (int x = rect.x0; x < rect.x1; ++x) out.pixels.push_back(source.at(x, y));
  }

  const auto path = crop_path(image_ref, rect, crop_dir);
  write_file_atomic(path, encode_pgm(out));
  return GroundedImage{image_ref, rect, padding_px, path.string(), false};
}

GroundedImage ground(const std::string& image_ref, const GroundingQuery& query,
                     const Detector* detector, bool vg_enabled, const GroundingOptions& options) {
  if (!vg_enabled) return GroundedImage{image_ref, std::nullopt, 0, image_ref, false};
  if (query.condition_text.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "grounding query text is empty");
  }
  if (detector == nullptr) throw Error(ErrorCode::kInvalidArgument, "grounding needs a detector");

  std::vector<Detection> detections;
  try {
    detections = detector->detect(image_ref, query.condition_text);
  } catch (const Error& e) {
    throw Error(e.code(), "detect '" + query.condition_text + "' on '" + image_ref + "': " + e.what());
  }
  if (detections.empty()) {
    logger()->warn("event=grounding_miss image={} query=\"{}\"", image_ref, query.condition_text);
    return GroundedImage{image_ref, std::nullopt, 0, image_ref, true};
  }
  for (const auto& d : detections) d.validate();
  const Detection& best = select_region(detections);
  return crop(image_ref, best.box, options.padding_px, options.crop_dir);
}

}  // namespace cxrprompt
