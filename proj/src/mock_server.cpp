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

#include "cxrprompt/mock_server.hpp"

#include <thread>

#include <httplib.h>

#include "cxrprompt/log.hpp"
#include "cxrprompt/wire.hpp"

namespace cxrprompt {

struct MockServer::Impl {
  explicit Impl(MockConfig config) : mock(config) {}

  MockBackend mock;
  httplib::Server server;
  std::thread thread;
};

namespace {

void reply(httplib::Response& res, int status, const wire::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSchemaError:
    case ErrorCode::kInvalidArgument: return 400;
    case ErrorCode::kContextOverflow: return 413;
    case ErrorCode::kIoError:
    case ErrorCode::kImageDecodeFailure:
    case ErrorCode::kBackendError: return 422;
    default: return 500;
  }
}

template <typename Handler>
httplib::Server::Handler json_endpoint(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      wire::json body;
      try {
        body = wire::json::parse(req.body);
      } catch (const wire::json::parse_error& e) {
        throw Error(ErrorCode::kSchemaError, std::string("request is not JSON: ") + e.what());
      }
      reply(res, 200, handler(body));
    } catch (const Error& e) {
      reply(res, status_for(e.code()), wire::error_response(e.what()));
    } catch (const std::exception& e) {
      reply(res, 500, wire::error_response(e.what()));
    }
  };
}

}  // namespace

MockServer::MockServer(MockConfig config) : impl_(std::make_unique<Impl>(config)) {
  auto& s = impl_->server;
  const MockBackend& mock = impl_->mock;

  s.Post(std::string(wire::kEmbedTextPath), json_endpoint([&mock](const wire::json& j) {
           return wire::vector_response(mock.embed_text(wire::parse_embed_text_request(j).text));
         }));
  s.Post(std::string(wire::kEmbedImagePath), json_endpoint([&mock](const wire::json& j) {
           const auto req = wire::parse_embed_image_request(j);
           return wire::vector_response(mock.embed_image_bytes(req.image.bytes()));
         }));
  s.Post(std::string(wire::kDetectPath), json_endpoint([&mock](const wire::json& j) {
           const auto req = wire::parse_detect_request(j);
           const auto detections = mock.detect_bytes(req.image.bytes(), req.query);
           return wire::detect_response(detections);
         }));
  s.Post(std::string(wire::kGeneratePath), json_endpoint([&mock](const wire::json& j) {
           const auto req = wire::parse_generate_request(j);
           std::vector<std::string> texts;
           std::size_t chars = 0;
           for (const auto& seg : req.segments) {
             if (seg.type == wire::Segment::Type::kText) {
               texts.push_back(seg.text);
               chars += seg.text.size();
             } else {
               chars += kImageToken.size();
             }
           }
           return wire::text_response(mock.generate_from_texts(texts, chars));
         }));
  s.Get(std::string(wire::kHealthPath), [&mock](const httplib::Request&, httplib::Response& res) {
    reply(res, 200,
          wire::json{{"status", "ok"},
                     {"backend", "mock"},
                     {"dim", mock.config().embedding_dim},
                     {"capabilities",
                      {{"embed_text", true}, {"embed_image", true}, {"detect", true}, {"generate", true}}}});
  });
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty()) {
      res.set_content(wire::error_response("no route for " + req.method + " " + req.path).dump(),
                      "application/json");
    }
  });
}

MockServer::~MockServer() { stop(); }

int MockServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void MockServer::serve() { impl_->server.listen_after_bind(); }

void MockServer::start() {
  impl_->thread = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
}

void MockServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace cxrprompt
