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

// Building the in-context VQA dataset: chart-event ingestion, Pearson-based
// feature selection, text serialisation of lab results and the
// candidate/query split.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cxrprompt/core.hpp"

namespace cxrprompt {

struct ChartEventRow {
  std::string patient_id;
  std::string label;
  double value = 0.0;
  std::string unit;
  std::optional<double> low;
  std::optional<double> high;
};

struct FeatureCell {
  double value = 0.0;
  std::string unit;
  std::optional<double> low;
  std::optional<double> high;
};

// Patients x lab features, sparse. Repeated (patient, feature) observations
// keep the last one.
class FeatureMatrix {
 public:
  void add(const ChartEventRow& row);

  [[nodiscard]] const std::vector<std::string>& patients() const noexcept { return patients_; }
  [[nodiscard]] const std::vector<std::string>& features() const noexcept { return features_; }
  [[nodiscard]] const FeatureCell* cell(const std::string& patient, const std::string& feature) const;
  // Values of one feature for the given patients, nullopt where missing.
  [[nodiscard]] std::vector<std::optional<double>> column(const std::string& feature,
                                                          std::span<const std::string> patients) const;
  [[nodiscard]] std::size_t filled_cells() const noexcept { return cells_.size(); }

 private:
  std::vector<std::string> patients_;  // first-seen order
  std::vector<std::string> features_;
  std::set<std::string> patient_set_;
  std::set<std::string> feature_set_;
  std::map<std::pair<std::string, std::string>, FeatureCell> cells_;
};

FeatureMatrix ingest_chartevents(std::span<const ChartEventRow> rows);

struct MalformedRow {
  std::size_t line;
  std::string message;
};

struct ChartEventsCsv {
  FeatureMatrix matrix;
  std::vector<MalformedRow> malformed;
};

// CSV with header patient_id,label,value,unit,low,high. "-" or empty means
// missing. Bad rows are skipped and reported with their line number.
ChartEventsCsv read_chartevents_csv(std::istream& in);

struct PearsonResult {
  double r = 0.0;
  bool constant_column = false;
  std::size_t pairs = 0;
};

// Pearson r after pairwise deletion of missing entries. A zero-variance side
// gives r = 0 with constant_column set. Throws kInsufficientData below two
// complete pairs and kLengthMismatch for unequal inputs.
PearsonResult pearson(std::span<const std::optional<double>> x, std::span<const std::optional<double>> y);
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

enum class RankBy { kAbsolute, kSigned };

struct RankedFeature {
  std::string name;
  double r = 0.0;
};

struct FeatureSelection {
  std::vector<RankedFeature> selected;
  std::vector<std::string> constant;      // excluded: zero variance
  std::vector<std::string> insufficient;  // excluded: fewer than two pairs
};

// patient -> 0/1 for one condition.
using LabelColumn = std::map<std::string, int>;

// Ranks features by |r| (or signed r) against the label, ties by name, and
// returns the top min(k, available).
FeatureSelection select_features(const FeatureMatrix& matrix, const LabelColumn& labels,
                                 std::size_t k = 10, RankBy rank_by = RankBy::kAbsolute);

// Shortest decimal that round-trips, never in exponent form.
std::string format_value(double value);

// "{value} {unit} {label}" joined by ", " ("0.52 sec QTc").
std::string serialize_features(std::span<const LabFeature> features);

enum class Split { kCandidate, kQuery };
std::string_view to_string(Split s);

struct DatasetRecord {
  Record record;
  Split split;
};

struct LabelSummary {
  std::vector<std::string> features;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t candidates = 0;
  std::size_t queries = 0;
};

inline constexpr std::string_view kBuilderVersion = "1";

struct VqaDataset {
  std::vector<DatasetRecord> records;
  std::map<std::string, LabelSummary> labels;
  std::uint64_t seed = 0;
  std::string source;

  [[nodiscard]] std::vector<const DatasetRecord*> for_label(const std::string& label, Split split) const;
};

struct SplitConfig {
  std::size_t pool_size = 6;
};

// condition -> (patient -> 0/1)
using LabelTable = std::map<std::string, LabelColumn>;
// patient -> image locators
using ImageIndex = std::map<std::string, std::vector<std::string>>;

// One binary record per (patient, condition). Candidate pools hold
// pool_size records with at least one of each class; everything else is a
// query. Query features are restricted to names some candidate carries.
VqaDataset build_dataset(const FeatureMatrix& matrix, const LabelTable& labels,
                         const ImageIndex& images, std::size_t k, const SplitConfig& split,
                         std::uint64_t seed, std::string source = "chartevents",
                         RankBy rank_by = RankBy::kAbsolute);

// CSV patient_id,image_path. Relative paths resolve against base_dir.
ImageIndex read_image_index_csv(std::istream& in, const std::filesystem::path& base_dir);
// CSV patient_id,condition,label.
LabelTable read_labels_csv(std::istream& in);

// JSONL records plus a manifest; both byte-stable for a given dataset.
void write_dataset(const VqaDataset& dataset, const std::filesystem::path& jsonl,
                   const std::filesystem::path& manifest);
VqaDataset read_dataset(const std::filesystem::path& jsonl, const std::filesystem::path& manifest);
std::filesystem::path default_manifest_path(const std::filesystem::path& jsonl);

std::string record_to_jsonl(const DatasetRecord& record);
DatasetRecord record_from_jsonl(std::string_view line);

}  // namespace cxrprompt
