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

#include <filesystem>

#include "cxrprompt/backends.hpp"
#include "cxrprompt/grounding.hpp"
#include "cxrprompt/image.hpp"
#include "helpers.hpp"

using namespace cxrprompt;
using cxrprompt::testing::TempDir;

namespace {

class FixedDetector final : public Detector {
 public:
  explicit FixedDetector(std::vector<Detection> d) : detections_(std::move(d)) {}
  std::vector<Detection> detect(const std::string&, std::string_view) const override { return detections_; }

 private:
  std::vector<Detection> detections_;
};

class FailingDetector final : public Detector {
 public:
  std::vector<Detection> detect(const std::string&, std::string_view) const override {
    throw Error(ErrorCode::kTransportError, "connection refused");
  }
};

std::string write_gradient(const std::filesystem::path& path, int w, int h) {
  GrayImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<std::size_t>(w * h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<std::uint8_t>((x + 3 * y) % 256);
  }
  write_file_atomic(path, encode_pgm(img));
  return path.string();
}

}  // namespace

TEST_CASE("select_region equals a brute-force max with lowest-index ties") {
  SeededRng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(12);
    std::vector<Detection> ds;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores so ties are common.
      ds.push_back(Detection{Box{0, 0, 1 + static_cast<int>(i), 1}, static_cast<double>(rng.index(5)) / 4.0});
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (ds[i].score > ds[best].score) best = i;
    }
    CHECK(&select_region(ds) == &ds[best]);
  }
  try {
    select_region(std::vector<Detection>{});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoDetections);
  }
}

TEST_CASE("padded_crop_rect") {
  CHECK(padded_crop_rect(Box{10, 10, 50, 50}, 5, 100, 100) == Box{5, 5, 55, 55});
  CHECK(padded_crop_rect(Box{10, 10, 50, 50}, 0, 100, 100) == Box{10, 10, 50, 50});
  CHECK(padded_crop_rect(Box{2, 3, 98, 99}, 10, 100, 100) == Box{0, 0, 100, 100});
  CHECK(padded_crop_rect(Box{-20, -20, 10, 10}, 0, 100, 100) == Box{0, 0, 10, 10});
  CHECK_THROWS_AS(padded_crop_rect(Box{120, 0, 130, 10}, 0, 100, 100), Error);
  CHECK_THROWS_AS(padded_crop_rect(Box{0, 0, 10, 10}, -1, 100, 100), Error);
}

TEST_CASE("crop rectangles always stay inside the image") {
  SeededRng rng(23);
  for (int trial = 0; trial < 2000; ++trial) {
    const int w = 1 + static_cast<int>(rng.index(200));
    const int h = 1 + static_cast<int>(rng.index(200));
    const int x0 = static_cast<int>(rng.index(static_cast<std::size_t>(w)));
    const int y0 = static_cast<int>(rng.index(static_cast<std::size_t>(h)));
    const Box box{x0, y0, x0 + 1 + static_cast<int>(rng.index(50)), y0 + 1 + static_cast<int>(rng.index(50))};
    const int pad = static_cast<int>(rng.index(30));
    const Box r = padded_crop_rect(box, pad, w, h);
    CHECK(r.x0 >= 0);
    CHECK(r.y0 >= 0);
    CHECK(r.x1 <= w);
    CHECK(r.y1 <= h);
    CHECK(r.width() >= 1);
    CHECK(r.height() >= 1);
    // The clamped box still covers the part of the detection inside the image.
    CHECK(r.x0 <= box.x0);
    CHECK(r.y0 <= box.y0);
    CHECK(r.x1 >= std::min(box.x1, w));
    CHECK(r.y1 >= std::min(box.y1, h));
  }
}

TEST_CASE("detections are validated") {
  CHECK_THROWS_AS((Detection{Box{0, 0, 0, 5}, 0.5}.validate()), Error);
  CHECK_THROWS_AS((Detection{Box{0, 0, 5, 5}, 1.5}.validate()), Error);
  CHECK_NOTHROW((Detection{Box{0, 0, 5, 5}, 1.0}.validate()));
}

TEST_CASE("ground with VG off is the identity") {
  const FixedDetector detector({Detection{Box{1, 1, 3, 3}, 0.9}});
  const auto g = ground("some/where.pgm", GroundingQuery{"Edema"}, &detector, false, {});
  CHECK(g.image_ref == "some/where.pgm");
  CHECK(g.source_ref == "some/where.pgm");
  CHECK_FALSE(g.box.has_value());
  CHECK_FALSE(g.grounding_miss);
  // No detector needed either.
  CHECK(ground("x.pgm", GroundingQuery{"Edema"}, nullptr, false, {}).image_ref == "x.pgm");
}

TEST_CASE("ground crops the best detection") {
  TempDir dir("ground");
  const std::string src = write_gradient(dir / "cxr.pgm", 40, 30);
  const FixedDetector detector({Detection{Box{0, 0, 5, 5}, 0.2}, Detection{Box{10, 8, 20, 18}, 0.8},
                                Detection{Box{2, 2, 4, 4}, 0.8}});
  GroundingOptions opts;
  opts.padding_px = 2;
  opts.crop_dir = dir / "crops";
  const auto g = ground(src, GroundingQuery{"Edema"}, &detector, true, opts);
  REQUIRE(g.box.has_value());
  CHECK(*g.box == Box{8, 6, 22, 20});
  CHECK(g.padding_px == 2);
  CHECK_FALSE(g.grounding_miss);

  const GrayImage source = load_image(src);
  const GrayImage cropped = load_image(g.image_ref);
  CHECK(cropped.width == 14);
  CHECK(cropped.height == 14);
  for (int y = 0; y < cropped.height; ++y) {
    for (int x = 0; x < cropped.width; ++x) CHECK(cropped.at(x, y) == source.at(x + 8, y + 6));
  }
  // Same input, same crop file.
  CHECK(ground(src, GroundingQuery{"Edema"}, &detector, true, opts).image_ref == g.image_ref);
}

TEST_CASE("zero detections pass the original through with a miss flag") {
  const FixedDetector detector({});
  const auto g = ground("orig.pgm", GroundingQuery{"Pneumonia"}, &detector, true, {});
  CHECK(g.image_ref == "orig.pgm");
  CHECK(g.grounding_miss);
  CHECK_FALSE(g.box.has_value());
}

TEST_CASE("detector failures propagate with their code") {
  const FailingDetector detector;
  try {
    ground("orig.pgm", GroundingQuery{"Pneumonia"}, &detector, true, {});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTransportError);
  }
  CHECK_THROWS_AS(ground("orig.pgm", GroundingQuery{""}, &detector, true, {}), Error);
  CHECK_THROWS_AS(ground("orig.pgm", GroundingQuery{"Edema"}, nullptr, true, {}), Error);
}

TEST_CASE("PGM codec round-trips and rejects garbage") {
  GrayImage img;
  img.width = 3;
  img.height = 2;
  img.pixels = {0, 1, 2, 253, 254, 255};
  const auto bytes = encode_pgm(img);
  const GrayImage back = decode_pgm(bytes);
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  CHECK(back.pixels == img.pixels);
  const std::vector<std::uint8_t> junk = {'P', '6', '\n', '1', ' ', '1', '\n', '2', '5', '5', '\n', 0, 0, 0};
  try {
    decode_pgm(junk);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kImageDecodeFailure);
  }
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 1);
  CHECK_THROWS_AS(decode_pgm(truncated), Error);
}
