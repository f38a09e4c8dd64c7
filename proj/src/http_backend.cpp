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

#include <httplib.h>

#include "cxrprompt/backends.hpp"
#include "cxrprompt/log.hpp"
#include "cxrprompt/wire.hpp"

namespace cxrprompt {

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw Error(ErrorCode::kInvalidArgument, "http backend needs a base URL");
  if (config_.retries < 0) throw Error(ErrorCode::kInvalidArgument, "retries must be >= 0");
}

std::string HttpBackend::post(const std::string& path, const std::string& body,
                              std::chrono::seconds timeout) const {
  // One client per call keeps the handle safe to share across threads.
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Result res;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    res = client.Post(path, body, "application/json");
    if (res) break;
    logger()->warn("event=transport_retry url={}{} attempt={} error={}", config_.base_url, path,
                   attempt + 1, httplib::to_string(res.error()));
  }
  if (!res) {
    throw Error(ErrorCode::kTransportError,
                config_.base_url + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    std::string message = "HTTP " + std::to_string(res->status);
    try {
      message += ": " + wire::parse_error_response(wire::json::parse(res->body));
    } catch (const std::exception&) {
      message += " (no error body)";
    }
    throw Error(res->status == 413 ? ErrorCode::kContextOverflow : ErrorCode::kBackendError,
                config_.base_url + path + ": " + message);
  }
  return res->body;
}

namespace {

template <typename Parse>
auto decode(const std::string& body, Parse parse) {
  wire::json j;
  try {
    j = wire::json::parse(body);
  } catch (const wire::json::parse_error& e) {
    throw Error(ErrorCode::kBackendError, std::string("invalid JSON reply: ") + e.what());
  }
  try {
    return parse(j);
  } catch (const Error& e) {
    throw Error(ErrorCode::kBackendError, e.what());
  }
}

}  // namespace

Embedding HttpBackend::embed_text(std::string_view text) const {
  const auto body = wire::to_json(wire::EmbedTextRequest{std::string(text)}).dump();
  return decode(post(std::string(wire::kEmbedTextPath), body, config_.timeout),
                wire::parse_vector_response);
}

Embedding HttpBackend::embed_image(const std::string& image_ref) const {
  const auto body =
      wire::to_json(wire::EmbedImageRequest{wire::ImagePayload::from_ref(image_ref, config_.inline_images)})
          .dump();
  return decode(post(std::string(wire::kEmbedImagePath), body, config_.timeout),
                wire::parse_vector_response);
}

std::vector<Detection> HttpBackend::detect(const std::string& image_ref,
                                           std::string_view condition_text) const {
  const auto body = wire::to_json(wire::DetectRequest{
                                      wire::ImagePayload::from_ref(image_ref, config_.inline_images),
                                      std::string(condition_text)})
                        .dump();
  return decode(post(std::string(wire::kDetectPath), body, config_.timeout),
                wire::parse_detect_response);
}

std::string HttpBackend::generate(const GenerateRequest& request) const {
  const auto body = wire::to_json(wire::to_wire(request, config_.inline_images)).dump();
  return decode(post(std::string(wire::kGeneratePath), body, config_.generate_timeout),
                wire::parse_text_response);
}

BackendSet make_http_backends(const HttpConfig& config) {
  auto http = std::make_shared<const HttpBackend>(config);
  return BackendSet{http, http, http, http};
}

}  // namespace cxrprompt
