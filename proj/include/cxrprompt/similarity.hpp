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

#include <span>

#include "cxrprompt/core.hpp"

namespace cxrprompt {

// A similarity value in [-1, 1].
class SimilarityScore {
 public:
  explicit SimilarityScore(double value);

  [[nodiscard]] double value() const noexcept { return value_; }

  friend auto operator<=>(const SimilarityScore&, const SimilarityScore&) = default;

 private:
  double value_;
};

// dot(a, b) / (|a| |b|). Zero-norm inputs are an error, never a score of 0:
// a zero embedding means the encoder failed.
SimilarityScore cosine(const Embedding& a, const Embedding& b);

// Elementwise mean of token-level vectors.
Embedding mean_pool(std::span<const Embedding> tokens);

// Proximity of a candidate to the query under the chosen modality. The
// multimodal score is the plain average of the image and text cosines.
SimilarityScore fused_score(const EmbeddedSample& query, const EmbeddedSample& candidate,
                            Modality modality);

}  // namespace cxrprompt
