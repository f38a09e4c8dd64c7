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

#include "cxrprompt/image.hpp"

#include <atomic>
#include <cctype>
#include <fstream>
#include <iterator>
#include <thread>

#include "cxrprompt/core.hpp"

namespace cxrprompt {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  int next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail("expected integer in header");
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) fail("header value too large");
      ++pos_;
    }
    return static_cast<int>(value);
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

  [[noreturn]] static void fail(const std::string& why) {
    throw Error(ErrorCode::kImageDecodeFailure, "PGM: " + why);
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') HeaderReader::fail("not a binary PGM");
  HeaderReader header(bytes);
  GrayImage image;
  image.width = header.next_int();
  image.height = header.next_int();
  const int maxval = header.next_int();
  if (image.width <= 0 || image.height <= 0) HeaderReader::fail("empty raster");
  if (maxval <= 0 || maxval > 255) HeaderReader::fail("only 8-bit rasters are supported");
  if (header.pos() >= bytes.size() || !std::isspace(bytes[header.pos()])) {
    HeaderReader::fail("missing separator before raster");
  }
  header.advance();
  const auto n = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height);
  if (bytes.size() - header.pos() < n) HeaderReader::fail("truncated raster");
  image.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header.pos()),
                      bytes.begin() + static_cast<std::ptrdiff_t>(header.pos() + n));
  return image;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "_" +
         std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIoError, "short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

GrayImage load_image(const std::string& image_ref) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(image_ref);
  } catch (const Error& e) {
    throw Error(ErrorCode::kImageDecodeFailure, e.what());
  }
  return decode_pgm(bytes);
}

}  // namespace cxrprompt
