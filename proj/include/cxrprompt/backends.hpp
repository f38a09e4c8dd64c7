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

// Model capabilities the pipeline depends on. Nothing in-process runs a real
// model: implementations are either the deterministic mocks below or a
// remote server speaking the JSON wire protocol (see wire.hpp).

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cxrprompt/core.hpp"
#include "cxrprompt/grounding.hpp"
#include "cxrprompt/prompt.hpp"

namespace cxrprompt {

struct GenerateRequest {
  PromptSequence prompt;
  int max_new_tokens = 20;
  std::optional<std::int64_t> seed;
};

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual Embedding embed_text(std::string_view text) const = 0;
};

class ImageEmbedder {
 public:
  virtual ~ImageEmbedder() = default;
  virtual Embedding embed_image(const std::string& image_ref) const = 0;
};

class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> detect(const std::string& image_ref,
                                        std::string_view condition_text) const = 0;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string generate(const GenerateRequest& request) const = 0;
};

// Handles are shared and safe to call from several threads at once.
struct BackendSet {
  std::shared_ptr<const TextEmbedder> text_embedder;
  std::shared_ptr<const ImageEmbedder> image_embedder;
  std::shared_ptr<const Detector> detector;
  std::shared_ptr<const Generator> generator;
};

struct MockConfig {
  std::uint64_t seed = 0;
  std::size_t embedding_dim = 64;
  // Prompts longer than this raise kContextOverflow.
  std::size_t context_chars = 32000;

  void validate() const;
};

// Deterministic stand-in for all four capabilities. Every output is a pure
// function of (input, seed):
//  - text: hashed bag of words; numbers are bucketed by leading digit and
//    magnitude and bound to the words of their comma-separated clause;
//  - image: block-averaged intensities through a seeded random projection;
//  - detect: bright connected regions (for a known condition only those in
//    its cell of a 4 x 3 grid) plus 0-2 seeded low-score decoys;
//  - generate: echoes the answer of the shot right before the query.
// All embeddings are L2-normalised.
class MockBackend final : public TextEmbedder,
                          public ImageEmbedder,
                          public Detector,
                          public Generator {
 public:
  explicit MockBackend(MockConfig config);

  Embedding embed_text(std::string_view text) const override;
  Embedding embed_image(const std::string& image_ref) const override;
  std::vector<Detection> detect(const std::string& image_ref,
                                std::string_view condition_text) const override;
  std::string generate(const GenerateRequest& request) const override;

  Embedding embed_image_bytes(std::span<const std::uint8_t> bytes) const;
  std::vector<Detection> detect_bytes(std::span<const std::uint8_t> bytes,
                                      std::string_view condition_text) const;
  // The generator only looks at text, so the server path can call this
  // without resolving images.
  std::string generate_from_texts(std::span<const std::string> texts, std::size_t chars) const;

  [[nodiscard]] const MockConfig& config() const noexcept { return config_; }

 private:
  std::vector<double> token_vector(std::string_view token) const;

  MockConfig config_;
};

BackendSet make_mock_backends(const MockConfig& config);

struct HttpConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  bool inline_images = false;  // send image_b64 instead of server-resolvable paths
  std::chrono::seconds generate_timeout{120};
  std::chrono::seconds timeout{30};
  int retries = 1;  // extra attempts after a transport failure
};

// Client side of the wire protocol. Non-2xx replies become kBackendError
// (kContextOverflow for 413) carrying the server's "error" message;
// connection failures become kTransportError.
class HttpBackend final : public TextEmbedder,
                          public ImageEmbedder,
                          public Detector,
                          public Generator {
 public:
  explicit HttpBackend(HttpConfig config);

  Embedding embed_text(std::string_view text) const override;
  Embedding embed_image(const std::string& image_ref) const override;
  std::vector<Detection> detect(const std::string& image_ref,
                                std::string_view condition_text) const override;
  std::string generate(const GenerateRequest& request) const override;

 private:
  std::string post(const std::string& path, const std::string& body,
                   std::chrono::seconds timeout) const;

  HttpConfig config_;
};

BackendSet make_http_backends(const HttpConfig& config);

// "mock" or "http:<base-url>".
BackendSet make_backends(std::string_view backend, std::uint64_t seed, std::size_t embedding_dim = 64);

}  // namespace cxrprompt
