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

// Dynamic proximity selection: score every candidate against the query, drop
// the ones below a similarity threshold and order the survivors so the most
// similar shot sits immediately before the query.

#include <cstddef>
#include <span>
#include <vector>

#include "cxrprompt/core.hpp"
#include "cxrprompt/similarity.hpp"

namespace cxrprompt {

struct DpsConfig {
  double threshold = 0.7;
  Modality modality = Modality::kMultimodal;
  // Floor on the number of retained shots when the threshold rejects
  // everything. Zero-shot prompting is never produced.
  std::size_t min_keep = 1;
};

struct PoolEntry {
  Candidate candidate;
  EmbeddedSample embedded;
};

struct ScoredCandidate {
  Candidate candidate;
  EmbeddedSample embedded;
  SimilarityScore score;
  std::size_t original_index;
};

// Shots in prompt order: ascending score, ties by ascending original_index.
// The last element is the argmax.
struct PromptOrder {
  std::vector<ScoredCandidate> shots;

  [[nodiscard]] std::size_t size() const noexcept { return shots.size(); }
  [[nodiscard]] std::vector<Candidate> candidates() const;
};

void validate_threshold(double threshold);

// Scores each pool entry once; output index i corresponds to pool[i].
std::vector<ScoredCandidate> score_pool(std::span<const PoolEntry> pool,
                                        const EmbeddedSample& query, Modality modality);

// Threshold filter plus ordering over already-scored candidates. Lets sweeps
// reuse one scoring pass.
PromptOrder select_scored(std::span<const ScoredCandidate> scored, double threshold,
                          std::size_t min_keep);

PromptOrder dps_select(std::span<const PoolEntry> pool, const EmbeddedSample& query,
                       const DpsConfig& config);

struct RetentionPoint {
  double threshold;
  std::size_t kept;

  friend bool operator==(const RetentionPoint&, const RetentionPoint&) = default;
};

// Kept-shot counts over an ascending list of thresholds (min_keep floor
// applied per point).
std::vector<RetentionPoint> retention_curve(std::span<const PoolEntry> pool,
                                            const EmbeddedSample& query,
                                            std::span<const double> thresholds, Modality modality,
                                            std::size_t min_keep = 1);

}  // namespace cxrprompt
