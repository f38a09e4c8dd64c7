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

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cxrprompt/core.hpp"
#include "cxrprompt/rng.hpp"
#include "cxrprompt/synth.hpp"

namespace cxrprompt::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cxrprompt_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Nonzero vector with entries in [-1, 1].
inline Embedding random_embedding(SeededRng& rng, std::size_t dim) {
  for (;;) {
    std::vector<double> v(dim);
    double norm = 0;
    for (auto& x : v) {
      x = rng.uniform(-1.0, 1.0);
      norm += x * x;
    }
    if (norm > 1e-6) return Embedding(std::move(v));
  }
}

inline Record make_record(const std::string& id, int label, const std::string& condition = "Edema",
                          std::vector<LabFeature> features = {}, const std::string& image = "img.pgm") {
  return Record(id, image, std::move(features), condition, label);
}

// Synthetic files written to `dir` and built into a dataset, the same way
// the CLI does it.
inline VqaDataset synth_dataset(const std::filesystem::path& dir, const SynthConfig& config = {},
                                std::size_t pool_size = 6) {
  const SynthFiles files = write_synth(synth_generate(config), dir);
  std::ifstream ce(files.chartevents);
  std::ifstream img(files.images);
  std::ifstream lab(files.labels);
  const ChartEventsCsv csv = read_chartevents_csv(ce);
  return build_dataset(csv.matrix, read_labels_csv(lab), read_image_index_csv(img, dir), 10,
                       SplitConfig{pool_size}, config.seed);
}

}  // namespace cxrprompt::testing
