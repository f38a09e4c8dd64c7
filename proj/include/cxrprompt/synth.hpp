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

// Seeded synthetic stand-in for restricted chart-event and chest X-ray data.
// Lab values carry planted correlations with the labels and every positive
// finding is drawn as a bright rectangle in a condition-specific slot of the
// image, so both feature selection and the mock models have signal.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cxrprompt/dataset.hpp"
#include "cxrprompt/image.hpp"

namespace cxrprompt {

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t n_patients = 60;
  std::size_t n_features = 20;
  std::vector<std::string> labels = {"Atelectasis", "Cardiomegaly", "Edema"};
  double missingness = 0.1;  // probability a (patient, feature) cell is absent
  int image_size = 64;

  void validate() const;
};

struct SynthOutput {
  std::vector<ChartEventRow> rows;
  LabelTable labels;
  std::vector<std::pair<std::string, GrayImage>> images;  // patient -> image
  // Features planted for each condition, strongest first.
  std::map<std::string, std::vector<std::string>> planted;
  std::vector<std::string> feature_names;
};

SynthOutput synth_generate(const SynthConfig& config);

struct SynthFiles {
  std::filesystem::path chartevents;
  std::filesystem::path labels;
  std::filesystem::path images;
};

// Writes chartevents.csv, labels.csv, images.csv and images/<patient>.pgm.
SynthFiles write_synth(const SynthOutput& synth, const std::filesystem::path& out_dir);

// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(const std::string& s);

}  // namespace cxrprompt
