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

#include "cxrprompt/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cxrprompt {

SimilarityScore::SimilarityScore(double value) : value_(value) {
  if (!std::isfinite(value) || value < -1.0 || value > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "similarity score outside [-1, 1]");
  }
}

namespace {

void check_dims(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "dims " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
  }
}

double norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

}  // namespace

SimilarityScore cosine(const Embedding& a, const Embedding& b) {
  check_dims(a, b);
  const double na = norm(a.values());
  const double nb = norm(b.values());
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kZeroNormVector, "cosine of a zero vector");

  // Both the dot product and na * nb are commutative in IEEE arithmetic, so
  // swapping the arguments yields the identical bit pattern.
  double dot = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) dot += a[i] * b[i];
  return SimilarityScore(std::clamp(dot / (na * nb), -1.0, 1.0));
}

Embedding mean_pool(std::span<const Embedding> tokens) {
  if (tokens.empty()) throw Error(ErrorCode::kEmptyInput, "mean_pool of no tokens");
  const std::size_t dim = tokens.front().dim();
  std::vector<double> sum(dim, 0.0);
  for (const auto& t : tokens) {
    if (t.dim() != dim) check_dims(tokens.front(), t);
    for (std::size_t i = 0; i < dim; ++i) sum[i] += t[i];
  }
  const double n = static_cast<double>(tokens.size());
  for (double& x : sum) x /= n;
  return Embedding(std::move(sum));
}

SimilarityScore fused_score(const EmbeddedSample& query, const EmbeddedSample& candidate,
                            Modality modality) {
  switch (modality) {
    case Modality::kImage: return cosine(candidate.image, query.image);
    case Modality::kText: return cosine(candidate.text, query.text);
    case Modality::kMultimodal: {
      const double image = cosine(candidate.image, query.image).value();
      const double text = cosine(candidate.text, query.text).value();
      return SimilarityScore((image + text) / 2.0);
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown modality");
}

}  // namespace cxrprompt
