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

#include "cxrprompt/dps.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cxrprompt {

std::vector<Candidate> PromptOrder::candidates() const {
  std::vector<Candidate> out;
  out.reserve(shots.size());
  for (const auto& s : shots) out.push_back(s.candidate);
  return out;
}

void validate_threshold(double threshold) {
  if (!std::isfinite(threshold) || threshold < -1.0 || threshold > 1.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "threshold " + std::to_string(threshold) + " outside [-1, 1]");
  }
}

namespace {

void validate_min_keep(std::size_t min_keep, std::size_t pool_size) {
  if (min_keep < 1 || min_keep > pool_size) {
    throw Error(ErrorCode::kInvalidArgument, "min_keep " + std::to_string(min_keep) +
                                                 " must be in [1, " + std::to_string(pool_size) + "]");
  }
}

bool prompt_less(const ScoredCandidate& a, const ScoredCandidate& b) {
  if (a.score.value() != b.score.value()) return a.score.value() < b.score.value();
  return a.original_index < b.original_index;
}

}  // namespace

std::vector<ScoredCandidate> score_pool(std::span<const PoolEntry> pool,
                                        const EmbeddedSample& query, Modality modality) {
  if (pool.empty()) throw Error(ErrorCode::kEmptyPool, "candidate pool is empty");
  std::vector<ScoredCandidate> scored;
  scored.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    scored.push_back(ScoredCandidate{pool[i].candidate, pool[i].embedded,
                                     fused_score(query, pool[i].embedded, modality), i});
  }
  return scored;
}

PromptOrder select_scored(std::span<const ScoredCandidate> scored, double threshold,
                          std::size_t min_keep) {
  if (scored.empty()) throw Error(ErrorCode::kEmptyPool, "candidate pool is empty");
  validate_threshold(threshold);
  validate_min_keep(min_keep, scored.size());

  PromptOrder order;
  for (const auto& s : scored) {
    if (s.score.value() >= threshold) order.shots.push_back(s);
  }
  if (order.shots.empty()) {
    // Nothing cleared the bar: keep the best min_keep instead.
    std::vector<ScoredCandidate> all(scored.begin(), scored.end());
    std::sort(all.begin(), all.end(), prompt_less);
    order.shots.assign(all.end() - static_cast<std::ptrdiff_t>(min_keep), all.end());
  }
  std::sort(order.shots.begin(), order.shots.end(), prompt_less);
  return order;
}

PromptOrder dps_select(std::span<const PoolEntry> pool, const EmbeddedSample& query,
                       const DpsConfig& config) {
  if (pool.empty()) throw Error(ErrorCode::kEmptyPool, "candidate pool is empty");
  validate_threshold(config.threshold);
  validate_min_keep(config.min_keep, pool.size());
  const auto scored = score_pool(pool, query, config.modality);
  return select_scored(scored, config.threshold, config.min_keep);
}

std::vector<RetentionPoint> retention_curve(std::span<const PoolEntry> pool,
                                            const EmbeddedSample& query,
                                            std::span<const double> thresholds, Modality modality,
                                            std::size_t min_keep) {
  if (pool.empty()) throw Error(ErrorCode::kEmptyPool, "candidate pool is empty");
  for (double th : thresholds) validate_threshold(th);
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw Error(ErrorCode::kInvalidArgument, "thresholds must be sorted ascending");
  }
  const auto scored = score_pool(pool, query, modality);
  std::vector<RetentionPoint> curve;
  curve.reserve(thresholds.size());
  for (double th : thresholds) {
    curve.push_back({th, select_scored(scored, th, min_keep).size()});
  }
  return curve;
}

}  // namespace cxrprompt
