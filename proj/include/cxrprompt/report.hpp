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

// Persisting and rendering experiment results: report JSON, comparison
// tables, sweep CSV and SVG line charts.

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cxrprompt/eval.hpp"

namespace cxrprompt {

// Pretty-printed with sorted keys; byte-stable for a given report.
std::string report_to_json(const Report& report);
Report report_from_json(std::string_view text);

struct Sweep {
  SweepAxis axis = SweepAxis::kGrid;
  std::vector<SweepPoint> points;
};

std::string sweep_to_json(const Sweep& sweep);
Sweep sweep_from_json(std::string_view text);

// Plain-text table: one header line, a rule, one row per setting. Column
// sets per axis:
//   grid      DPS Setting | VG Setting | Precision | Recall | F1-score | Accuracy
//   shots     Prompt Setting | Precision | ...
//   modality  DPS Modality | Precision | ...
//   threshold Threshold | Precision | ... | Mean Shots
std::string render_table(const Sweep& sweep);
std::string render_report(const Report& report);

// One row per setting.
std::string sweep_to_csv(const Sweep& sweep);

// Named numeric columns read back from a sweep CSV, in file order.
struct SweepTable {
  std::vector<std::string> columns;
  std::vector<std::map<std::string, std::string>> rows;

  [[nodiscard]] std::vector<double> numeric(const std::string& column) const;
};

SweepTable read_sweep_csv(std::istream& in);

struct ChartOptions {
  std::string x_column = "threshold";
  std::vector<std::string> y_columns = {"precision", "recall", "f1", "accuracy"};
  std::string x_label = "DPS threshold";
  std::string y_label = "Score";
  std::string title;
};

// Line chart with one series per y column, y fixed to [0, 1].
std::string line_chart_svg(const SweepTable& table, const ChartOptions& options = {});

}  // namespace cxrprompt
