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

// JSON-over-HTTP protocol spoken between the engine and model servers.
//
//   POST /v1/embed/text   {"text": s}                        -> {"vector": [x], "dim": n}
//   POST /v1/embed/image  {"image_b64": s} | {"path": s}     -> {"vector": [x], "dim": n}
//   POST /v1/detect       {"image_b64"|"path": s, "query": s} -> {"detections": [{"box": [x0,y0,x1,y1], "score": p}]}
//   POST /v1/generate     {"segments": [{"type": "text", "text": s} |
//                                       {"type": "image", "image_b64"|"path": s}],
//                          "max_new_tokens": n, "seed": n?}   -> {"text": s}
//
// Failures are non-2xx with {"error": s}. Box coordinates are integers, every
// other number is a double.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cxrprompt/backends.hpp"

namespace cxrprompt::wire {

inline constexpr std::string_view kEmbedTextPath = "/v1/embed/text";
inline constexpr std::string_view kEmbedImagePath = "/v1/embed/image";
inline constexpr std::string_view kDetectPath = "/v1/detect";
inline constexpr std::string_view kGeneratePath = "/v1/generate";
inline constexpr std::string_view kHealthPath = "/healthz";

using nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws kSchemaError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Exactly one of the two is set.
struct ImagePayload {
  std::optional<std::string> path;
  std::optional<std::string> b64;

  static ImagePayload from_ref(const std::string& image_ref, bool inline_bytes);
  // Raw bytes, reading the file for path payloads.
  [[nodiscard]] std::vector<std::uint8_t> bytes() const;
  friend bool operator==(const ImagePayload&, const ImagePayload&) = default;
};

struct Segment {
  enum class Type { kText, kImage };
  Type type = Type::kText;
  std::string text;
  ImagePayload image;
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct EmbedTextRequest {
  std::string text;
  friend bool operator==(const EmbedTextRequest&, const EmbedTextRequest&) = default;
};

struct EmbedImageRequest {
  ImagePayload image;
  friend bool operator==(const EmbedImageRequest&, const EmbedImageRequest&) = default;
};

struct DetectRequest {
  ImagePayload image;
  std::string query;
  friend bool operator==(const DetectRequest&, const DetectRequest&) = default;
};

struct GenerateWireRequest {
  std::vector<Segment> segments;
  int max_new_tokens = 20;
  std::optional<std::int64_t> seed;
  friend bool operator==(const GenerateWireRequest&, const GenerateWireRequest&) = default;
};

GenerateWireRequest to_wire(const GenerateRequest& request, bool inline_images);

json to_json(const EmbedTextRequest& r);
json to_json(const EmbedImageRequest& r);
json to_json(const DetectRequest& r);
json to_json(const GenerateWireRequest& r);
json vector_response(const Embedding& e);
json detect_response(std::span<const Detection> detections);
json text_response(std::string_view text);
json error_response(std::string_view message);

// Decoders validate the schema strictly and throw kSchemaError.
EmbedTextRequest parse_embed_text_request(const json& j);
EmbedImageRequest parse_embed_image_request(const json& j);
DetectRequest parse_detect_request(const json& j);
GenerateWireRequest parse_generate_request(const json& j);
Embedding parse_vector_response(const json& j);
std::vector<Detection> parse_detect_response(const json& j);
std::string parse_text_response(const json& j);
std::string parse_error_response(const json& j);

}  // namespace cxrprompt::wire
