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

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>

#include "cxrprompt/similarity.hpp"
#include "helpers.hpp"

using namespace cxrprompt;
using cxrprompt::testing::random_embedding;
using boost::multiprecision::cpp_rational;

namespace {

Embedding E(std::vector<double> v) { return Embedding(std::move(v)); }

}  // namespace

TEST_CASE("cosine of integer vectors against exact rational arithmetic") {
  CHECK(cosine(E({1, 2, 2}), E({2, 1, 2})).value() == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
  CHECK(std::abs(cosine(E({1, 2, 2}), E({2, 1, 2})).value() - 8.0 / 9.0) <= 1e-12);

  // cos^2 = dot^2 / (|a|^2 |b|^2) is rational for integer inputs.
  SeededRng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t dim = 1 + rng.index(16);
    std::vector<double> a(dim), b(dim);
    cpp_rational dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      const int x = static_cast<int>(rng.index(21)) - 10;
      const int y = static_cast<int>(rng.index(21)) - 10;
      a[i] = x;
      b[i] = y;
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
    if (na == 0 || nb == 0) continue;
    const double c = cosine(E(a), E(b)).value();
    const double exact_sq = static_cast<double>(cpp_rational(dot * dot / (na * nb)));
    CHECK(std::abs(c * c - exact_sq) <= 1e-12);
    CHECK((dot >= 0) == (c >= 0));
  }
}

TEST_CASE("cosine rejects zero vectors and mismatched dimensions") {
  CHECK_THROWS_AS(cosine(E({0, 0}), E({1, 0})), Error);
  try {
    cosine(E({1, 0}), E({0, 0}));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroNormVector);
  }
  try {
    cosine(E({1, 0}), E({1, 0, 0}));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimensionMismatch);
  }
}

TEST_CASE("cosine is symmetric, bounded and 1 on itself") {
  SeededRng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t dim = 1 + rng.index(32);
    const Embedding a = random_embedding(rng, dim);
    const Embedding b = random_embedding(rng, dim);
    const double ab = cosine(a, b).value();
    CHECK(ab == cosine(b, a).value());
    CHECK(ab >= -1.0);
    CHECK(ab <= 1.0);
    CHECK(cosine(a, a).value() == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Parallel vectors of very different scale still clamp to [-1, 1].
  CHECK(cosine(E({1e-150, 1e-150}), E({1e150, 1e150})).value() <= 1.0);
  CHECK(cosine(E({3, 0}), E({-5, 0})).value() == -1.0);
}

TEST_CASE("embedding and score validation") {
  CHECK_THROWS_AS(Embedding({}), Error);
  CHECK_THROWS_AS(Embedding({1.0, std::nan("")}), Error);
  CHECK_THROWS_AS(SimilarityScore(1.5), Error);
  CHECK_THROWS_AS(SimilarityScore(std::nan("")), Error);
  CHECK(SimilarityScore(0.25) < SimilarityScore(0.5));
}

TEST_CASE("mean_pool") {
  const std::vector<Embedding> tokens = {E({1, 0}), E({0, 1}), E({2, 2})};
  CHECK(mean_pool(tokens) == E({1, 1}));
  CHECK_THROWS_AS(mean_pool(std::vector<Embedding>{}), Error);
  CHECK_THROWS_AS(mean_pool(std::vector<Embedding>{E({1}), E({1, 2})}), Error);
}

TEST_CASE("fused score is the mean of the channel cosines") {
  SeededRng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t di = 1 + rng.index(16);
    const std::size_t dt = 1 + rng.index(16);
    const EmbeddedSample q{random_embedding(rng, di), random_embedding(rng, dt)};
    const EmbeddedSample c{random_embedding(rng, di), random_embedding(rng, dt)};
    const double img = cosine(q.image, c.image).value();
    const double txt = cosine(q.text, c.text).value();
    CHECK(std::abs(fused_score(q, c, Modality::kMultimodal).value() - (img + txt) / 2.0) <= 1e-12);
    CHECK(fused_score(q, c, Modality::kImage).value() == img);
    CHECK(fused_score(q, c, Modality::kText).value() == txt);
  }
}

TEST_CASE("fused score worked examples") {
  // Channel cosines 0.8 (image) and 0.6 (text).
  const EmbeddedSample q{E({1, 0}), E({1, 0})};
  const EmbeddedSample c{E({0.8, 0.6}), E({0.6, 0.8})};
  CHECK(fused_score(q, c, Modality::kMultimodal).value() == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(fused_score(q, c, Modality::kImage).value() == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(fused_score(q, c, Modality::kText).value() == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("modality names round-trip") {
  for (auto m : {Modality::kText, Modality::kImage, Modality::kMultimodal}) {
    CHECK(parse_modality(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_modality("audio"), Error);
}
