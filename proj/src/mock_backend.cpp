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

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <variant>

#include "cxrprompt/backends.hpp"
#include "cxrprompt/image.hpp"
#include "cxrprompt/rng.hpp"

namespace cxrprompt {

namespace {

constexpr int kGrid = 8;
constexpr int kBright = 150;
constexpr std::size_t kMinRegionPixels = 4;

std::vector<double> l2_normalised(std::vector<double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  const double n = std::sqrt(sum);
  if (n == 0.0) throw Error(ErrorCode::kBackendError, "mock produced a zero embedding");
  for (double& x : v) x /= n;
  return v;
}

std::optional<double> parse_number(std::string_view word) {
  double value = 0.0;
  const auto* end = word.data() + word.size();
  const auto [ptr, ec] = std::from_chars(word.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

// Coarse magnitude bucket: sign, leading digit and decimal exponent.
std::string number_bucket(double value) {
  if (value == 0.0) return "0";
  const double mag = std::fabs(value);
  int exponent = static_cast<int>(std::floor(std::log10(mag)));
  int digit = static_cast<int>(mag / std::pow(10.0, exponent));
  if (digit >= 10) {
    digit /= 10;
    ++exponent;
  }
  return (value < 0 ? "-" : "") + std::to_string(std::max(digit, 1)) + "e" + std::to_string(exponent);
}

std::vector<std::string> split_words(std::string_view clause) {
  std::vector<std::string> words;
  std::string word;
  for (char c : clause) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!word.empty()) words.push_back(std::move(word));
      word.clear();
    } else {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  if (!word.empty()) words.push_back(std::move(word));
  return words;
}

std::uint64_t bytes_hash(std::span<const std::uint8_t> bytes) {
  return fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

struct Region {
  Box box;
  double score;
};

std::vector<Region> bright_regions(const GrayImage& image) {
  std::vector<Region> regions;
  std::vector<bool> seen(image.pixels.size(), false);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const auto idx = static_cast<std::size_t>(y * image.width + x);
      if (seen[idx] || image.at(x, y) < kBright) continue;
      Box box{x, y, x + 1, y + 1};
      double sum = 0.0;
      std::size_t count = 0;
      stack.assign(1, {x, y});
      seen[idx] = true;
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        sum += image.at(cx, cy);
        ++count;
        box.x0 = std::min(box.x0, cx);
        box.y0 = std::min(box.y0, cy);
        box.x1 = std::max(box.x1, cx + 1);
        box.y1 = std::max(box.y1, cy + 1);
        constexpr int dx[] = {1, -1, 0, 0};
        constexpr int dy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + dx[k];
          const int ny = cy + dy[k];
          if (nx < 0 || ny < 0 || nx >= image.width || ny >= image.height) continue;
          const auto nidx = static_cast<std::size_t>(ny * image.width + nx);
          if (seen[nidx] || image.at(nx, ny) < kBright) continue;
          seen[nidx] = true;
          stack.emplace_back(nx, ny);
        }
      }
      if (count < kMinRegionPixels) continue;
      const double mean = sum / static_cast<double>(count);
      const double score = 0.5 + 0.5 * std::clamp((mean - kBright) / (255.0 - kBright), 0.0, 1.0);
      regions.push_back({box, score});
    }
  }
  std::stable_sort(regions.begin(), regions.end(),
                   [](const Region& a, const Region& b) { return a.score > b.score; });
  return regions;
}

}  // namespace

void MockConfig::validate() const {
  if (embedding_dim < 2) throw Error(ErrorCode::kInvalidArgument, "mock embedding_dim must be >= 2");
}

MockBackend::MockBackend(MockConfig config) : config_(config) { config_.validate(); }

std::vector<double> MockBackend::token_vector(std::string_view token) const {
  const std::uint64_t base = mix_seed(config_.seed, token);
  std::vector<double> v(config_.embedding_dim);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 2.0 * to_unit(splitmix64(base + i)) - 1.0;
  return v;
}

Embedding MockBackend::embed_text(std::string_view text) const {
  std::vector<double> sum(config_.embedding_dim, 0.0);
  std::size_t tokens = 0;
  auto add = [&](const std::string& token) {
    const auto v = token_vector(token);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v[i];
    ++tokens;
  };

  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto clause = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    const auto words = split_words(clause);
    std::string context;
    std::vector<std::string> numbers;
    for (const auto& w : words) {
      if (const auto value = parse_number(w)) {
        numbers.push_back(number_bucket(*value));
      } else {
        add("w:" + w);
        context += (context.empty() ? "" : " ") + w;
      }
    }
    for (const auto& n : numbers) add("n:" + context + ":" + n);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (tokens == 0) throw Error(ErrorCode::kBackendError, "embed_text needs non-empty text");
  return Embedding(l2_normalised(std::move(sum)));
}

Embedding MockBackend::embed_image(const std::string& image_ref) const {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(image_ref);
  } catch (const Error& e) {
    throw Error(ErrorCode::kBackendError, e.what());
  }
  return embed_image_bytes(bytes);
}

Embedding MockBackend::embed_image_bytes(std::span<const std::uint8_t> bytes) const {
  if (bytes.empty()) throw Error(ErrorCode::kBackendError, "embed_image needs non-empty bytes");
  std::vector<double> raw;
  try {
    const GrayImage image = decode_pgm(bytes);
    raw.reserve(kGrid * kGrid + 1);
    for (int gy = 0; gy < kGrid; ++gy) {
      const int y0 = gy * image.height / kGrid;
      const int y1 = std::max(y0 + 1, (gy + 1) * image.height / kGrid);
      for (int gx = 0; gx < kGrid; ++gx) {
        const int x0 = gx * image.width / kGrid;
        const int x1 = std::max(x0 + 1, (gx + 1) * image.width / kGrid);
        double sum = 0.0;
        int n = 0;
        for (int y = y0; y < std::min(y1, image.height); ++y) {
          for (int x = x0; x < std::min(x1, image.width); ++x) {
            sum += image.at(x, y);
            ++n;
          }
        }
        raw.push_back(n == 0 ? 0.0 : sum / (255.0 * n) - 0.5);
      }
    }
    raw.push_back(0.05);  // bias term keeps uniform mid-grey images off the origin
  } catch (const Error&) {
    // Not a raster we understand: fall back to a pure content hash.
    return Embedding(l2_normalised(token_vector("bytes:" + std::to_string(bytes_hash(bytes)))));
  }

  std::vector<double> out(config_.embedding_dim, 0.0);
  const std::uint64_t base = mix_seed(config_.seed, "image-projection");
  for (std::size_t j = 0; j < out.size(); ++j) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      out[j] += raw[i] * (2.0 * to_unit(splitmix64(base + j * raw.size() + i)) - 1.0);
    }
  }
  return Embedding(l2_normalised(std::move(out)));
}

std::vector<Detection> MockBackend::detect(const std::string& image_ref,
                                           std::string_view condition_text) const {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(image_ref);
  } catch (const Error& e) {
    throw Error(ErrorCode::kBackendError, e.what());
  }
  return detect_bytes(bytes, condition_text);
}

std::vector<Detection> MockBackend::detect_bytes(std::span<const std::uint8_t> bytes,
                                                 std::string_view condition_text) const {
  if (condition_text.empty()) throw Error(ErrorCode::kBackendError, "detect needs a query");
  GrayImage image;
  try {
    image = decode_pgm(bytes);
  } catch (const Error& e) {
    throw Error(ErrorCode::kBackendError, e.what());
  }

  // Known findings are looked for in their own cell of a 4 x 3 grid laid
  // over the image, in vocabulary order; free-text queries match anywhere.
  std::optional<std::size_t> cell;
  if (is_known_condition(condition_text)) cell = condition_index(condition_text);
  auto in_cell = [&](const Box& b) {
    if (!cell) return true;
    const int cx = (b.x0 + b.x1) / 2;
    const int cy = (b.y0 + b.y1) / 2;
    const auto col = static_cast<std::size_t>(std::min(3, cx * 4 / image.width));
    const auto row = static_cast<std::size_t>(std::min(2, cy * 3 / image.height));
    return row * 4 + col == *cell;
  };

  std::vector<Detection> out;
  for (const auto& r : bright_regions(image)) {
    if (out.size() == 2) break;
    if (in_cell(r.box)) out.push_back({r.box, r.score});
  }

  SeededRng rng(mix_seed(config_.seed ^ bytes_hash(bytes), condition_text));
  const std::size_t min_decoys = out.empty() ? 1 : 0;
  const std::size_t max_decoys = std::min<std::size_t>(2, 3 - out.size());
  const std::size_t decoys = min_decoys + rng.index(max_decoys - min_decoys + 1);
  for (std::size_t i = 0; i < decoys; ++i) {
    const int w = std::max(1, image.width / 8 + static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, image.width / 4)))));
    const int h = std::max(1, image.height / 8 + static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, image.height / 4)))));
    const int x0 = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, image.width - w + 1))));
    const int y0 = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, image.height - h + 1))));
    out.push_back({Box{x0, y0, std::min(image.width, x0 + w), std::min(image.height, y0 + h)},
                   rng.uniform(0.05, 0.45)});
  }
  return out;
}

std::string MockBackend::generate(const GenerateRequest& request) const {
  if (request.max_new_tokens < 1) throw Error(ErrorCode::kBackendError, "max_new_tokens must be >= 1");
  const auto texts = request.prompt.texts();
  std::size_t chars = 0;
  for (const auto& s : request.prompt.segments) {
    chars += std::holds_alternative<ImageSlot>(s) ? kImageToken.size()
                                                  : std::get<TextSegment>(s).text.size();
  }
  return generate_from_texts(texts, chars);
}

std::string MockBackend::generate_from_texts(std::span<const std::string> texts,
                                             std::size_t chars) const {
  if (chars > config_.context_chars) {
    throw Error(ErrorCode::kContextOverflow, std::to_string(chars) + " characters exceed the mock context");
  }
  // texts = [q1, a1, ..., qn, an, query]; echo the answer nearest the query.
  if (texts.size() < 2) return "I cannot answer without examples.";
  return texts[texts.size() - 2];
}

BackendSet make_mock_backends(const MockConfig& config) {
  auto mock = std::make_shared<const MockBackend>(config);
  return BackendSet{mock, mock, mock, mock};
}

BackendSet make_backends(std::string_view backend, std::uint64_t seed, std::size_t embedding_dim) {
  if (backend == "mock") return make_mock_backends(MockConfig{seed, embedding_dim});
  if (backend.starts_with("http:")) {
    HttpConfig http;
    http.base_url = std::string(backend.substr(5));
    if (http.base_url.starts_with("//")) http.base_url = "http:" + http.base_url;
    return make_http_backends(http);
  }
  throw Error(ErrorCode::kInvalidArgument, "backend must be 'mock' or 'http:<base-url>', got '" +
                                               std::string(backend) + "'");
}

}  // namespace cxrprompt
