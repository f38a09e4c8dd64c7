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

#include <doctest.h>

#include <httplib.h>

#include <cstdlib>

#include "cxrprompt/backends.hpp"
#include "cxrprompt/eval.hpp"
#include "cxrprompt/image.hpp"
#include "cxrprompt/mock_server.hpp"
#include "cxrprompt/report.hpp"
#include "cxrprompt/wire.hpp"
#include "helpers.hpp"

using namespace cxrprompt;
using cxrprompt::testing::TempDir;
using wire::json;

namespace {

std::string write_pgm(const std::filesystem::path& path) {
  GrayImage img;
  img.width = 48;
  img.height = 48;
  img.pixels.assign(48 * 48, 45);
  for (int y = 5; y < 14; ++y) {
    for (int x = 3; x < 10; ++x) img.at(x, y) = 240;
  }
  write_file_atomic(path, encode_pgm(img));
  return path.string();
}

struct Reply {
  int status = 0;
  json body;
};

Reply post(const std::string& base, const std::string& path, const std::string& body) {
  httplib::Client client(base);
  client.set_read_timeout(std::chrono::seconds(10));
  auto res = client.Post(path, body, "application/json");
  REQUIRE(res);
  return Reply{res->status, json::parse(res->body)};
}

bool is_error_shape(const Reply& r) {
  return r.status >= 400 && r.body.is_object() && r.body.contains("error") && r.body["error"].is_string() &&
         !r.body["error"].get<std::string>().empty();
}

// Wire-level checks any conforming server must pass. Shared between the
// in-process mock server and an external adapter (CXRPROMPT_ADAPTER_URL).
void conformance(const std::string& base, const std::string& image_path) {
  httplib::Client client(base);
  auto health = client.Get(std::string(wire::kHealthPath));
  REQUIRE(health);
  CHECK(health->status == 200);
  const json h = json::parse(health->body);
  CHECK(h.at("status") == "ok");
  const std::size_t dim = h.at("dim").get<std::size_t>();
  CHECK(dim >= 1);

  // Embeddings: consistent dim, L2-normalised, deterministic.
  for (const std::string text : {"0.52 sec QTc", "no laboratory test results", "9 L/min Minute Volume"}) {
    const Reply r = post(base, std::string(wire::kEmbedTextPath), json{{"text", text}}.dump());
    REQUIRE(r.status == 200);
    const Embedding e = wire::parse_vector_response(r.body);
    CHECK(e.dim() == dim);
    double n = 0;
    for (double v : e.values()) n += v * v;
    CHECK(n == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(wire::parse_vector_response(
              post(base, std::string(wire::kEmbedTextPath), json{{"text", text}}.dump()).body) == e);
  }

  const std::vector<std::uint8_t> bytes = read_file_bytes(image_path);
  const Reply by_path = post(base, std::string(wire::kEmbedImagePath), json{{"path", image_path}}.dump());
  const Reply by_b64 =
      post(base, std::string(wire::kEmbedImagePath), json{{"image_b64", wire::base64_encode(bytes)}}.dump());
  REQUIRE(by_path.status == 200);
  REQUIRE(by_b64.status == 200);
  CHECK(wire::parse_vector_response(by_path.body) == wire::parse_vector_response(by_b64.body));
  CHECK(wire::parse_vector_response(by_path.body).dim() == dim);

  const Reply det = post(base, std::string(wire::kDetectPath),
                         json{{"image_b64", wire::base64_encode(bytes)}, {"query", "Atelectasis"}}.dump());
  REQUIRE(det.status == 200);
  for (const auto& d : wire::parse_detect_response(det.body)) {
    CHECK(d.score >= 0.0);
    CHECK(d.score <= 1.0);
    CHECK(d.box.x0 < d.box.x1);
    CHECK(d.box.y0 < d.box.y1);
  }

  const json gen = {{"segments",
                     {{{"type", "image"}, {"path", image_path}},
                      {{"type", "text"}, {"text", "Question: Is the patient likely to have Edema?"}},
                      {{"type", "text"}, {"text", "yes"}},
                      {{"type", "image"}, {"image_b64", wire::base64_encode(bytes)}},
                      {{"type", "text"}, {"text", "Question: Is the patient likely to have Edema?"}}}},
                    {"max_new_tokens", 20},
                    {"seed", 7}};
  const Reply g = post(base, std::string(wire::kGeneratePath), gen.dump());
  REQUIRE(g.status == 200);
  CHECK_NOTHROW(wire::parse_text_response(g.body));

  // Error shapes.
  CHECK(is_error_shape(post(base, std::string(wire::kEmbedTextPath), "{not json")));
  CHECK(post(base, std::string(wire::kEmbedTextPath), "{not json").status == 400);
  CHECK(post(base, std::string(wire::kEmbedTextPath), json{{"txt", "x"}}.dump()).status == 400);
  CHECK(post(base, std::string(wire::kEmbedImagePath), json{{"path", "a"}, {"image_b64", "AA=="}}.dump()).status ==
        400);
  CHECK(post(base, std::string(wire::kDetectPath), json{{"path", image_path}}.dump()).status == 400);
  CHECK(post(base, std::string(wire::kGeneratePath), json{{"segments", json::array()}, {"max_new_tokens", 0}}.dump())
            .status == 400);
  const Reply missing = post(base, std::string(wire::kEmbedImagePath), json{{"path", "/no/such/file.pgm"}}.dump());
  CHECK(is_error_shape(missing));
  CHECK(missing.status == 422);
  const Reply nowhere = post(base, "/v1/nowhere", "{}");
  CHECK(nowhere.status == 404);
  CHECK(is_error_shape(nowhere));
}

}  // namespace

TEST_CASE("base64") {
  const std::string s = "foobar";
  const std::vector<std::uint8_t> foobar(s.begin(), s.end());
  CHECK(wire::base64_encode(foobar) == "Zm9vYmFy");
  CHECK(wire::base64_encode(std::vector<std::uint8_t>(foobar.begin(), foobar.begin() + 4)) == "Zm9vYg==");
  CHECK(wire::base64_encode(std::vector<std::uint8_t>(foobar.begin(), foobar.begin() + 5)) == "Zm9vYmE=");
  CHECK(wire::base64_decode("Zm9vYg==") == std::vector<std::uint8_t>(foobar.begin(), foobar.begin() + 4));
  SeededRng rng(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint8_t> b(rng.index(64));
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.index(256));
    CHECK(wire::base64_decode(wire::base64_encode(b)) == b);
  }
  for (const char* bad : {"Zm9", "Zm9v!mFy", "Z===", "Zm9vYg=a"}) CHECK_THROWS_AS(wire::base64_decode(bad), Error);
}

TEST_CASE("request schemas round-trip and are strict") {
  const wire::EmbedTextRequest t{"hello"};
  CHECK(wire::parse_embed_text_request(wire::to_json(t)) == t);
  wire::ImagePayload p;
  p.path = "/x.pgm";
  const wire::DetectRequest d{p, "Edema"};
  CHECK(wire::parse_detect_request(wire::to_json(d)) == d);
  wire::GenerateWireRequest g;
  g.segments = {wire::Segment{wire::Segment::Type::kText, "Q", {}},
                wire::Segment{wire::Segment::Type::kImage, "", p}};
  g.max_new_tokens = 5;
  g.seed = 42;
  CHECK(wire::parse_generate_request(wire::to_json(g)) == g);
  g.seed.reset();
  CHECK(wire::parse_generate_request(wire::to_json(g)) == g);

  auto schema_error = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code() == ErrorCode::kSchemaError;
    }
    return false;
  };
  CHECK(schema_error([] { wire::parse_embed_text_request(json{{"text", 3}}); }));
  CHECK(schema_error([] { wire::parse_embed_text_request(json::array()); }));
  CHECK(schema_error([] { wire::parse_embed_image_request(json::object()); }));
  CHECK(schema_error([] { wire::parse_vector_response(json{{"vector", {1.0, 0.0}}, {"dim", 3}}); }));
  CHECK(schema_error([] { wire::parse_vector_response(json{{"vector", json::array()}, {"dim", 0}}); }));
  CHECK(schema_error([] {
    wire::parse_detect_response(json{{"detections", {{{"box", {0.5, 0, 1, 1}}, {"score", 0.5}}}}});
  }));
  CHECK(schema_error([] {
    wire::parse_detect_response(json{{"detections", {{{"box", {0, 0, 1}}, {"score", 0.5}}}}});
  }));
  CHECK(schema_error([] {
    wire::parse_generate_request(json{{"segments", {{{"type", "audio"}}}}, {"max_new_tokens", 3}});
  }));
  CHECK(schema_error([] { wire::parse_text_response(json{{"txt", "yes"}}); }));

  const auto dets = wire::parse_detect_response(
      wire::detect_response(std::vector<Detection>{{Box{1, 2, 3, 4}, 0.25}}));
  REQUIRE(dets.size() == 1);
  CHECK(dets[0] == Detection{Box{1, 2, 3, 4}, 0.25});
  const Embedding e({0.6, -0.8});
  CHECK(wire::parse_vector_response(wire::vector_response(e)) == e);
  CHECK(wire::parse_error_response(wire::error_response("boom")) == "boom");
}

TEST_CASE("serve-mock passes the conformance suite") {
  TempDir dir("wire");
  const std::string image = write_pgm(dir / "cxr.pgm");
  MockServer server(MockConfig{5, 24});
  const int port = server.bind("127.0.0.1", 0);
  server.start();
  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  conformance(base, image);

  SUBCASE("http client reproduces the in-process mock exactly") {
    const MockBackend local(MockConfig{5, 24});
    HttpConfig cfg;
    cfg.base_url = base;
    for (bool inline_images : {false, true}) {
      cfg.inline_images = inline_images;
      const HttpBackend remote(cfg);
      CHECK(remote.embed_text("0.52 sec QTc") == local.embed_text("0.52 sec QTc"));
      CHECK(remote.embed_image(image) == local.embed_image(image));
      CHECK(remote.detect(image, "Atelectasis") == local.detect(image, "Atelectasis"));
      GenerateRequest req;
      req.prompt.segments = {ImageSlot{image}, TextSegment{"Q"}, TextSegment{"yes"}, ImageSlot{image},
                             TextSegment{"Q"}};
      CHECK(remote.generate(req) == local.generate(req));
    }
  }

  SUBCASE("a run over the wire matches the in-process run") {
    const VqaDataset ds = cxrprompt::testing::synth_dataset(dir / "synth", SynthConfig{5, 16});
    ExperimentConfig config;
    config.seed = 5;
    config.crop_dir = dir / "crops";
    HttpConfig cfg;
    cfg.base_url = base;
    const Report remote = run_experiment(config, ds, make_http_backends(cfg));
    const Report local = run_experiment(config, ds, make_mock_backends(MockConfig{5, 24}));
    CHECK(remote.errors.empty());
    CHECK(report_to_json(remote) == report_to_json(local));
  }

  SUBCASE("server errors map to client error codes") {
    HttpConfig cfg;
    cfg.base_url = base;
    const HttpBackend remote(cfg);
    GenerateRequest req;
    req.prompt.segments = {TextSegment{std::string(40000, 'x')}, TextSegment{"yes"}, TextSegment{"Q"}};
    try {
      remote.generate(req);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kContextOverflow);
    }
    try {
      remote.embed_image((dir / "missing.pgm").string());
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kBackendError);
      CHECK(std::string(e.what()).find("422") != std::string::npos);
    }
  }
  server.stop();
}

TEST_CASE("connection failures are transport errors") {
  // Bind a port, then release it so nothing listens there.
  int port = 0;
  {
    MockServer probe(MockConfig{});
    port = probe.bind("127.0.0.1", 0);
  }
  HttpConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.timeout = std::chrono::seconds(2);
  cfg.retries = 1;
  const HttpBackend remote(cfg);
  try {
    remote.embed_text("x");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTransportError);
  }
  CHECK_THROWS_AS(HttpBackend(HttpConfig{}), Error);
}

TEST_CASE("external adapter conformance" * doctest::skip(std::getenv("CXRPROMPT_ADAPTER_URL") == nullptr)) {
  TempDir dir("adapter");
  // The adapter must be able to read this path, so it runs on the same host.
  conformance(std::getenv("CXRPROMPT_ADAPTER_URL"), write_pgm(dir / "cxr.pgm"));
}
