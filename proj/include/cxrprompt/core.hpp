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

// Domain types shared by every stage of the pipeline. Nothing in here talks
// to a model or touches pixels.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cxrprompt {

enum class ErrorCode {
  kDimensionMismatch,
  kZeroNormVector,
  kEmptyInput,
  kEmptyPool,
  kInvalidArgument,
  kNoDetections,
  kBoxOutsideImage,
  kImageDecodeFailure,
  kUnknownLabel,
  kZeroShots,
  kMissingImage,
  kPromptTooLong,
  kTransportError,
  kBackendError,
  kContextOverflow,
  kMalformedRow,
  kInsufficientData,
  kInsufficientClassExamples,
  kLengthMismatch,
  kEmptyConfusion,
  kSchemaError,
  kIoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// CLI can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// True for errors caused by a model backend rather than by input data.
bool is_backend_error(ErrorCode code);

// Closed vocabulary of the twelve chest X-ray findings.
inline constexpr std::array<std::string_view, 12> kConditions = {
    "Atelectasis",      "Cardiomegaly",  "Consolidation",
    "Edema",            "Enlarged Cardiomediastinum",
    "Fracture",         "Lung Lesion",   "Lung Opacity",
    "Pleural Effusion", "Pleural Other", "Pneumonia",
    "Pneumothorax",
};

bool is_known_condition(std::string_view name);
// Position in kConditions; throws kUnknownLabel.
std::size_t condition_index(std::string_view name);

// One laboratory measurement. Reference bounds are frequently absent in real
// charts, so both are optional.
struct LabFeature {
  std::string label;
  double value = 0.0;
  std::string unit;
  std::optional<double> low;
  std::optional<double> high;

  void validate() const;
  friend bool operator==(const LabFeature&, const LabFeature&) = default;
};

class Record {
 public:
  Record(std::string id, std::string image_ref, std::vector<LabFeature> features,
         std::string label_name, int label);

  [[nodiscard]] const std::string& id() const noexcept { return id_; }
  [[nodiscard]] const std::string& image_ref() const noexcept { return image_ref_; }
  [[nodiscard]] const std::vector<LabFeature>& features() const noexcept { return features_; }
  [[nodiscard]] const std::string& label_name() const noexcept { return label_name_; }
  [[nodiscard]] int label() const noexcept { return label_; }

  // Same record seen through a different image (e.g. a grounded crop).
  [[nodiscard]] Record with_image(std::string image_ref) const;

  friend bool operator==(const Record&, const Record&) = default;

 private:
  std::string id_;
  std::string image_ref_;
  std::vector<LabFeature> features_;
  std::string label_name_;
  int label_;
};

// A labelled demonstration available for few-shot prompting.
struct Candidate {
  Record record;
};

// The record being diagnosed. Its label is only read by the evaluator.
struct QuerySample {
  Record record;
};

class Embedding {
 public:
  explicit Embedding(std::vector<double> values);

  [[nodiscard]] std::size_t dim() const noexcept { return values_.size(); }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
};

struct EmbeddedSample {
  Embedding image;
  Embedding text;
};

enum class Modality { kText, kImage, kMultimodal };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view s);

struct Prediction {
  enum class Outcome { kPositive, kNegative, kUnparseable };
  Outcome outcome = Outcome::kUnparseable;
  std::string raw_text;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

std::string_view to_string(Prediction::Outcome o);

}  // namespace cxrprompt
