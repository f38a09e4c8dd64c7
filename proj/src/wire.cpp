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

#include "cxrprompt/wire.hpp"

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include "cxrprompt/image.hpp"

namespace cxrprompt::wire {

namespace {

namespace b64 = boost::archive::iterators;

constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

[[noreturn]] void schema_error(const std::string& what) { throw Error(ErrorCode::kSchemaError, what); }

const json& field(const json& j, const char* name) {
  if (!j.is_object()) schema_error("expected a JSON object");
  const auto it = j.find(name);
  if (it == j.end()) schema_error(std::string("missing field '") + name + "'");
  return *it;
}

std::string string_field(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_string()) schema_error(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::int64_t int_field(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_number_integer()) schema_error(std::string("field '") + name + "' must be an integer");
  return v.get<std::int64_t>();
}

ImagePayload parse_image(const json& j) {
  ImagePayload p;
  const bool has_path = j.contains("path");
  const bool has_b64 = j.contains("image_b64");
  if (has_path == has_b64) schema_error("exactly one of 'path' and 'image_b64' is required");
  if (has_path) {
    p.path = string_field(j, "path");
  } else {
    p.b64 = string_field(j, "image_b64");
  }
  return p;
}

void put_image(json& j, const ImagePayload& p) {
  if (p.path) {
    j["path"] = *p.path;
  } else {
    j["image_b64"] = p.b64.value_or("");
  }
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  using Encoder = b64::base64_from_binary<b64::transform_width<const std::uint8_t*, 6, 8>>;
  std::string out(Encoder(bytes.data()), Encoder(bytes.data() + bytes.size()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) schema_error("base64 length must be a multiple of 4");
  const std::size_t pad = text.ends_with("==") ? 2 : text.ends_with('=') ? 1 : 0;
  const std::string_view body = text.substr(0, text.size() - pad);
  if (body.find_first_not_of(kAlphabet) != std::string_view::npos) schema_error("invalid base64 character");
  using Decoder = b64::transform_width<b64::binary_from_base64<const char*>, 8, 6>;
  std::vector<std::uint8_t> out(Decoder(body.data()), Decoder(body.data() + body.size()));
  // The decoder emits the partial trailing byte of padded input; drop it.
  out.resize(text.size() / 4 * 3 - pad);
  return out;
}

ImagePayload ImagePayload::from_ref(const std::string& image_ref, bool inline_bytes) {
  ImagePayload p;
  if (inline_bytes) {
    p.b64 = base64_encode(read_file_bytes(image_ref));
  } else {
    p.path = image_ref;
  }
  return p;
}

std::vector<std::uint8_t> ImagePayload::bytes() const {
  if (path) return read_file_bytes(*path);
  return base64_decode(b64.value_or(""));
}

GenerateWireRequest to_wire(const GenerateRequest& request, bool inline_images) {
  GenerateWireRequest w;
  w.max_new_tokens = request.max_new_tokens;
  w.seed = request.seed;
  for (const auto& s : request.prompt.segments) {
    Segment seg;
    if (const auto* img = std::get_if<ImageSlot>(&s)) {
      seg.type = Segment::Type::kImage;
      seg.image = ImagePayload::from_ref(img->image_ref, inline_images);
    } else {
      seg.text = std::get<TextSegment>(s).text;
    }
    w.segments.push_back(std::move(seg));
  }
  return w;
}

json to_json(const EmbedTextRequest& r) { return json{{"text", r.text}}; }

json to_json(const EmbedImageRequest& r) {
  json j = json::object();
  put_image(j, r.image);
  return j;
}

json to_json(const DetectRequest& r) {
  json j = json::object();
  put_image(j, r.image);
  j["query"] = r.query;
  return j;
}

json to_json(const GenerateWireRequest& r) {
  json segments = json::array();
  for (const auto& s : r.segments) {
    json js = json::object();
    if (s.type == Segment::Type::kText) {
      js["type"] = "text";
      js["text"] = s.text;
    } else {
      js["type"] = "image";
      put_image(js, s.image);
    }
    segments.push_back(std::move(js));
  }
  json j{{"segments", std::move(segments)}, {"max_new_tokens", r.max_new_tokens}};
  if (r.seed) j["seed"] = *r.seed;
  return j;
}

json vector_response(const Embedding& e) {
  json values = json::array();
  for (double v : e.values()) values.push_back(v);
  return json{{"vector", std::move(values)}, {"dim", e.dim()}};
}

json detect_response(std::span<const Detection> detections) {
  json arr = json::array();
  for (const auto& d : detections) {
    arr.push_back(json{{"box", {d.box.x0, d.box.y0, d.box.x1, d.box.y1}}, {"score", d.score}});
  }
  return json{{"detections", std::move(arr)}};
}

json text_response(std::string_view text) { return json{{"text", text}}; }

json error_response(std::string_view message) { return json{{"error", message}}; }

EmbedTextRequest parse_embed_text_request(const json& j) {
  EmbedTextRequest r{string_field(j, "text")};
  if (r.text.empty()) schema_error("'text' must be non-empty");
  return r;
}

EmbedImageRequest parse_embed_image_request(const json& j) {
  if (!j.is_object()) schema_error("expected a JSON object");
  return EmbedImageRequest{parse_image(j)};
}

DetectRequest parse_detect_request(const json& j) {
  if (!j.is_object()) schema_error("expected a JSON object");
  DetectRequest r{parse_image(j), string_field(j, "query")};
  if (r.query.empty()) schema_error("'query' must be non-empty");
  return r;
}

GenerateWireRequest parse_generate_request(const json& j) {
  GenerateWireRequest r;
  const json& segments = field(j, "segments");
  if (!segments.is_array()) schema_error("'segments' must be an array");
  for (const auto& js : segments) {
    Segment s;
    const std::string type = string_field(js, "type");
    if (type == "text") {
      s.text = string_field(js, "text");
    } else if (type == "image") {
      s.type = Segment::Type::kImage;
      s.image = parse_image(js);
    } else {
      schema_error("unknown segment type '" + type + "'");
    }
    r.segments.push_back(std::move(s));
  }
  const auto max_tokens = int_field(j, "max_new_tokens");
  if (max_tokens < 1) schema_error("'max_new_tokens' must be >= 1");
  r.max_new_tokens = static_cast<int>(max_tokens);
  if (j.contains("seed") && !j["seed"].is_null()) r.seed = int_field(j, "seed");
  return r;
}

Embedding parse_vector_response(const json& j) {
  const json& values = field(j, "vector");
  if (!values.is_array()) schema_error("'vector' must be an array");
  std::vector<double> v;
  v.reserve(values.size());
  for (const auto& x : values) {
    if (!x.is_number()) schema_error("'vector' entries must be numbers");
    v.push_back(x.get<double>());
  }
  const auto dim = int_field(j, "dim");
  if (dim != static_cast<std::int64_t>(v.size())) schema_error("'dim' does not match vector length");
  try {
    return Embedding(std::move(v));
  } catch (const Error& e) {
    schema_error(e.what());
  }
}

std::vector<Detection> parse_detect_response(const json& j) {
  const json& arr = field(j, "detections");
  if (!arr.is_array()) schema_error("'detections' must be an array");
  std::vector<Detection> out;
  for (const auto& d : arr) {
    const json& box = field(d, "box");
    if (!box.is_array() || box.size() != 4) schema_error("'box' must be [x0, y0, x1, y1]");
    for (const auto& c : box) {
      if (!c.is_number_integer()) schema_error("box coordinates must be integers");
    }
    const json& score = field(d, "score");
    if (!score.is_number()) schema_error("'score' must be a number");
    Detection det{Box{box[0].get<int>(), box[1].get<int>(), box[2].get<int>(), box[3].get<int>()},
                  score.get<double>()};
    try {
      det.validate();
    } catch (const Error& e) {
      schema_error(e.what());
    }
    out.push_back(det);
  }
  return out;
}

std::string parse_text_response(const json& j) { return string_field(j, "text"); }

std::string parse_error_response(const json& j) { return string_field(j, "error"); }

}  // namespace cxrprompt::wire
