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

#include "cxrprompt/core.hpp"

#include <algorithm>
#include <cmath>

namespace cxrprompt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kZeroNormVector: return "ZeroNormVector";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyPool: return "EmptyPool";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNoDetections: return "NoDetections";
    case ErrorCode::kBoxOutsideImage: return "BoxOutsideImage";
    case ErrorCode::kImageDecodeFailure: return "ImageDecodeFailure";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kZeroShots: return "ZeroShots";
    case ErrorCode::kMissingImage: return "MissingImage";
    case ErrorCode::kPromptTooLong: return "PromptTooLong";
    case ErrorCode::kTransportError: return "TransportError";
    case ErrorCode::kBackendError: return "BackendError";
    case ErrorCode::kContextOverflow: return "ContextOverflow";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kInsufficientClassExamples: return "InsufficientClassExamples";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyConfusion: return "EmptyConfusion";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

bool is_backend_error(ErrorCode code) {
  return code == ErrorCode::kTransportError || code == ErrorCode::kBackendError ||
         code == ErrorCode::kContextOverflow;
}

bool is_known_condition(std::string_view name) {
  return std::find(kConditions.begin(), kConditions.end(), name) != kConditions.end();
}

std::size_t condition_index(std::string_view name) {
  const auto it = std::find(kConditions.begin(), kConditions.end(), name);
  if (it == kConditions.end()) {
    throw Error(ErrorCode::kUnknownLabel, "'" + std::string(name) + "' is not one of the 12 conditions");
  }
  return static_cast<std::size_t>(it - kConditions.begin());
}

void LabFeature::validate() const {
  if (label.empty()) throw Error(ErrorCode::kInvalidArgument, "lab feature label is empty");
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kInvalidArgument, "lab feature '" + label + "' has a non-finite value");
  }
  if (low && high && *low > *high) {
    throw Error(ErrorCode::kInvalidArgument, "lab feature '" + label + "' has low > high");
  }
}

Record::Record(std::string id, std::string image_ref, std::vector<LabFeature> features,
               std::string label_name, int label)
    : id_(std::move(id)),
      image_ref_(std::move(image_ref)),
      features_(std::move(features)),
      label_name_(std::move(label_name)),
      label_(label) {
  if (id_.empty()) throw Error(ErrorCode::kInvalidArgument, "record id is empty");
  if (!is_known_condition(label_name_)) {
    throw Error(ErrorCode::kUnknownLabel, "record '" + id_ + "' has unknown label '" + label_name_ + "'");
  }
  if (label_ != 0 && label_ != 1) {
    throw Error(ErrorCode::kInvalidArgument, "record '" + id_ + "' label must be 0 or 1");
  }
  for (const auto& f : features_) f.validate();
}

Record Record::with_image(std::string image_ref) const {
  Record copy = *this;
  copy.image_ref_ = std::move(image_ref);
  return copy;
}

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::kEmptyInput, "embedding must have dim >= 1");
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "embedding has a non-finite entry");
  }
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kText: return "text";
    case Modality::kImage: return "image";
    case Modality::kMultimodal: return "multimodal";
  }
  return "multimodal";
}

Modality parse_modality(std::string_view s) {
  if (s == "text") return Modality::kText;
  if (s == "image") return Modality::kImage;
  if (s == "multimodal") return Modality::kMultimodal;
  throw Error(ErrorCode::kInvalidArgument, "unknown modality '" + std::string(s) + "'");
}

std::string_view to_string(Prediction::Outcome o) {
  switch (o) {
    case Prediction::Outcome::kPositive: return "positive";
    case Prediction::Outcome::kNegative: return "negative";
    case Prediction::Outcome::kUnparseable: return "unparseable";
  }
  return "unparseable";
}

}  // namespace cxrprompt
