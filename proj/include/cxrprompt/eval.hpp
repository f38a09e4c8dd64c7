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

// Metrics, the experiment runner and ablation sweeps.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cxrprompt/backends.hpp"
#include "cxrprompt/dataset.hpp"
#include "cxrprompt/dps.hpp"
#include "cxrprompt/prompt.hpp"

namespace cxrprompt {

enum class UnparseablePolicy { kCountIncorrect, kExclude };

std::string_view to_string(UnparseablePolicy p);
UnparseablePolicy parse_unparseable_policy(std::string_view s);

struct ExperimentConfig {
  bool dps_enabled = true;
  bool vg_enabled = true;
  Modality modality = Modality::kMultimodal;
  double threshold = 0.7;
  std::size_t shots = 6;
  TemplateKind template_kind = TemplateKind::kImageEhrText;
  std::uint64_t seed = 0;
  UnparseablePolicy unparseable_policy = UnparseablePolicy::kCountIncorrect;
  int padding_px = 0;
  std::size_t max_prompt_chars = 8000;
  int max_new_tokens = 20;
  std::size_t min_keep = 1;
  std::size_t concurrency = 4;
  std::filesystem::path crop_dir = "crops";

  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Keys match the field names (template_kind is "template"). Missing keys
// keep their defaults; unknown keys are a kSchemaError.
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(std::string_view text, ExperimentConfig base = {});

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  // Unparseable answers seen. Under kCountIncorrect they are also folded
  // into fn/fp; under kExclude they are only counted in `excluded`.
  std::size_t unparseable = 0;
  std::size_t excluded = 0;

  [[nodiscard]] std::size_t scored() const noexcept { return tp + fp + fn + tn; }
  [[nodiscard]] std::size_t total() const noexcept { return scored() + excluded; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Throws kLengthMismatch.
ConfusionMatrix confusion(std::span<const Prediction::Outcome> predictions, std::span<const int> golds,
                          UnparseablePolicy policy = UnparseablePolicy::kCountIncorrect);
void tally(ConfusionMatrix& cm, Prediction::Outcome prediction, int gold, UnparseablePolicy policy);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  // Per-class F1 of both classes averaged by class support.
  double weighted_f1 = 0.0;
  // Set when the quantity had a zero denominator and was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

// Throws kEmptyConfusion when nothing was scored.
Metrics metrics(const ConfusionMatrix& cm);

struct QueryError {
  std::string query_id;
  std::string message;
};

struct QueryResult {
  std::string query_id;
  std::string label_name;
  int gold = 0;
  Prediction prediction;
  std::size_t shots_offered = 0;
  std::size_t shots_kept = 0;
  std::string adjacent_shot_id;  // the shot right before the query
  double adjacent_score = 0.0;
  bool grounding_miss = false;
  std::optional<std::string> error;
};

struct LabelReport {
  ConfusionMatrix confusion;
  std::optional<Metrics> metrics;  // absent when every query was excluded
};

struct Report {
  ExperimentConfig config;
  ConfusionMatrix confusion;
  std::optional<Metrics> metrics;
  std::map<std::string, LabelReport> per_label;
  std::map<std::size_t, std::size_t> retained_histogram;  // shots kept -> queries
  std::vector<QueryError> errors;
  std::size_t grounding_misses = 0;
  std::vector<QueryResult> queries;

  [[nodiscard]] double mean_retained() const;
};

// What the runner saw for one query, for inspection and tests.
struct QueryTrace {
  const QueryResult& result;
  const PromptOrder& order;
  const PromptSequence& prompt;
};
using QueryCallback = std::function<void(const QueryTrace&)>;

// Indices into a label's candidate pool offered to one query: `shots` of
// them, both classes present when the pool and shot count allow it, sorted
// ascending. Depends only on (seed, query_id), so DPS on and off see the
// same offer.
std::vector<std::size_t> select_pool_subset(std::uint64_t seed, std::string_view query_id,
                                            std::span<const int> pool_labels, std::size_t shots);

// Backend failures on a query are recorded as unparseable with an error
// entry; data and schema problems abort the run. The callback is invoked
// under a lock, in no particular order.
Report run_experiment(const ExperimentConfig& config, const VqaDataset& dataset,
                      const BackendSet& backends, const QueryCallback& on_query = {});

enum class SweepAxis { kShots, kThreshold, kModality, kGrid };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view s);

struct SweepPoint {
  std::string setting;  // row label, e.g. "6-shot", "0.7", "Image", "on/off"
  Report report;
};

// Default values per axis: shots 4..12 step 2; thresholds -1, -0.5, 0, 0.5,
// 0.7, 0.9, 1. Modality and grid take no values.
std::vector<double> default_sweep_values(SweepAxis axis);

std::vector<std::pair<std::string, ExperimentConfig>> sweep_configs(SweepAxis axis,
                                                                    std::span<const double> values,
                                                                    const ExperimentConfig& base);

std::vector<SweepPoint> sweep(SweepAxis axis, std::span<const double> values, const ExperimentConfig& base,
                              const VqaDataset& dataset, const BackendSet& backends);

}  // namespace cxrprompt
