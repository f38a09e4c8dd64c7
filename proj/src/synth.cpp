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

#include "cxrprompt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>

#include "cxrprompt/rng.hpp"

namespace cxrprompt {

namespace {

struct LabSpec {
  const char* name;
  const char* unit;
  double mean;
  std::optional<double> low;
  std::optional<double> high;
};

// Realistic-looking chart items; beyond this list names are generated.
const LabSpec kLabs[] = {
    {"ELWI (PiCCO)", "mL/kg", 9.0, 3.0, 7.0},
    {"GEDI (PiCCO)", "mL/m2", 720.0, 680.0, 800.0},
    {"QTc", "sec", 0.45, std::nullopt, 0.46},
    {"HDL", "mg/dL", 48.0, 40.0, std::nullopt},
    {"Cholesterol", "mg/dL", 180.0, std::nullopt, 200.0},
    {"LDL measured", "mg/dL", 110.0, std::nullopt, 130.0},
    {"D-Dimer", "ng/mL", 600.0, std::nullopt, 500.0},
    {"Uric Acid", "mg/dL", 5.5, 2.5, 7.0},
    {"CO (Arterial)", "L/min", 5.2, 4.0, 8.0},
    {"SV (Arterial)", "mL/beat", 70.0, 60.0, 100.0},
    {"SVV (Arterial)", "%", 11.0, std::nullopt, 13.0},
    {"Serum Osmolality", "mOsm/kg", 290.0, 275.0, 295.0},
    {"Troponin-T", "ng/mL", 0.08, std::nullopt, 0.01},
    {"Total Bilirubin", "mg/dL", 1.1, 0.1, 1.2},
    {"CK-MB", "ng/mL", 4.0, std::nullopt, 6.0},
    {"Ammonia", "umol/L", 35.0, 11.0, 32.0},
    {"Ionized Calcium", "mmol/L", 1.15, 1.12, 1.32},
    {"Glucose (whole blood)", "mg/dL", 120.0, 70.0, 100.0},
    {"Chloride (whole blood)", "mEq/L", 104.0, 96.0, 108.0},
    {"Minute Volume", "L/min", 9.0, std::nullopt, 12.0},
    {"Tidal Volume (observed)", "mL", 479.0, 299.0, 750.0},
    {"Flow Rate (L/min)", "L/min", 39.9, std::nullopt, std::nullopt},
    {"Plateau Pressure", "cmH2O", 24.0, std::nullopt, 31.0},
    {"Temperature Celsius", "", 37.0, 36.0, 38.0},
};

// Effect sizes, in standard deviations, of the planted features per label.
constexpr double kPlantedEffects[] = {3.0, -2.4, 1.8};
constexpr std::size_t kMaxPlanted = std::size(kPlantedEffects);

LabSpec lab_spec(std::size_t i) {
  if (i < std::size(kLabs)) return kLabs[i];
  return LabSpec{nullptr, "U/L", 20.0 + 7.0 * static_cast<double>(i % 13), std::nullopt, std::nullopt};
}

std::string lab_name(std::size_t i) {
  if (i < std::size(kLabs)) return kLabs[i].name;
  return "Lab Test " + std::to_string(i + 1);
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string patient_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "p%04zu", i + 1);
  return buf;
}

GrayImage draw_image(SeededRng& rng, int size, const std::vector<std::size_t>& positive_slots) {
  GrayImage img;
  img.width = size;
  img.height = size;
  img.pixels.resize(static_cast<std::size_t>(size) * static_cast<std::size_t>(size));
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      img.at(x, y) = static_cast<std::uint8_t>(30 + y * 20 / size + rng.index(40));
    }
  }
  // 4 x 3 grid of slots, one per condition in the vocabulary.
  const int cell_w = size / 4;
  const int cell_h = size / 3;
  for (std::size_t slot : positive_slots) {
    const int cx = static_cast<int>(slot % 4) * cell_w;
    const int cy = static_cast<int>(slot / 4) * cell_h;
    const int jx = static_cast<int>(rng.index(5)) - 2;
    const int jy = static_cast<int>(rng.index(5)) - 2;
    const int x0 = std::clamp(cx + cell_w / 5 + jx, 0, size - 1);
    const int y0 = std::clamp(cy + cell_h / 5 + jy, 0, size - 1);
    const int x1 = std::min(size, x0 + cell_w * 3 / 5);
    const int y1 = std::min(size, y0 + cell_h * 3 / 5);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) img.at(x, y) = static_cast<std::uint8_t>(190 + rng.index(66));
    }
  }
  return img;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_patients < 4) throw Error(ErrorCode::kInvalidArgument, "synthetic data needs n_patients >= 4");
  if (n_features < 2) throw Error(ErrorCode::kInvalidArgument, "synthetic data needs n_features >= 2");
  if (labels.empty()) throw Error(ErrorCode::kInvalidArgument, "synthetic data needs at least one label");
  std::set<std::string> seen;
  for (const auto& l : labels) {
    condition_index(l);
    if (!seen.insert(l).second) throw Error(ErrorCode::kInvalidArgument, "duplicate label '" + l + "'");
  }
  if (!(missingness >= 0.0 && missingness < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "missingness must be in [0, 1)");
  }
  if (image_size < 16) throw Error(ErrorCode::kInvalidArgument, "image_size must be >= 16");
}

SynthOutput synth_generate(const SynthConfig& config) {
  config.validate();
  SynthOutput out;
  SeededRng rng(mix_seed(config.seed, "synth"));

  for (std::size_t f = 0; f < config.n_features; ++f) out.feature_names.push_back(lab_name(f));

  // Consecutive disjoint blocks of planted features, one block per label.
  const std::size_t per_label =
      std::clamp<std::size_t>(config.n_features / config.labels.size(), 1, kMaxPlanted);
  std::vector<std::vector<std::pair<std::size_t, double>>> planted_by_label(config.labels.size());
  for (std::size_t l = 0; l < config.labels.size(); ++l) {
    for (std::size_t p = 0; p < per_label; ++p) {
      const std::size_t f = l * per_label + p;
      if (f >= config.n_features) break;
      planted_by_label[l].emplace_back(f, kPlantedEffects[p]);
      out.planted[config.labels[l]].push_back(out.feature_names[f]);
    }
  }

  std::vector<std::vector<int>> label_values(config.labels.size(), std::vector<int>(config.n_patients));
  for (std::size_t l = 0; l < config.labels.size(); ++l) {
    for (auto& v : label_values[l]) v = rng.bernoulli(0.5) ? 1 : 0;
    const bool constant = std::all_of(label_values[l].begin(), label_values[l].end(),
                                      [&](int v) { return v == label_values[l].front(); });
    if (constant) label_values[l].front() ^= 1;
  }

  for (std::size_t p = 0; p < config.n_patients; ++p) {
    const std::string pid = patient_id(p);
    std::vector<double> shift(config.n_features, 0.0);
    std::vector<std::size_t> slots;
    for (std::size_t l = 0; l < config.labels.size(); ++l) {
      const int y = label_values[l][p];
      out.labels[config.labels[l]][pid] = y;
      if (y == 1) {
        slots.push_back(condition_index(config.labels[l]));
        for (const auto& [f, effect] : planted_by_label[l]) shift[f] += effect;
      }
    }
    for (std::size_t f = 0; f < config.n_features; ++f) {
      const LabSpec spec = lab_spec(f);
      const double sd = 0.1 * spec.mean;
      const double value = round2(spec.mean + sd * (shift[f] + rng.normal(0.0, 1.0)));
      if (rng.bernoulli(config.missingness)) continue;
      out.rows.push_back(ChartEventRow{pid, out.feature_names[f], value, spec.unit, spec.low, spec.high});
    }
    out.images.emplace_back(pid, draw_image(rng, config.image_size, slots));
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

SynthFiles write_synth(const SynthOutput& synth, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "images");
  SynthFiles files{out_dir / "chartevents.csv", out_dir / "labels.csv", out_dir / "images.csv"};

  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + p.string() + "'");
    return out;
  };
  auto opt = [](const std::optional<double>& v) { return v ? format_value(*v) : std::string("-"); };

  {
    auto out = open(files.chartevents);
    out << "patient_id,label,value,unit,low,high\n";
    for (const auto& r : synth.rows) {
      out << csv_field(r.patient_id) << ',' << csv_field(r.label) << ',' << format_value(r.value) << ','
          << csv_field(r.unit) << ',' << opt(r.low) << ',' << opt(r.high) << '\n';
    }
  }
  {
    auto out = open(files.labels);
    out << "patient_id,condition,label\n";
    for (const auto& [condition, column] : synth.labels) {
      for (const auto& [patient, label] : column) {
        out << csv_field(patient) << ',' << csv_field(condition) << ',' << label << '\n';
      }
    }
  }
  {
    auto out = open(files.images);
    out << "patient_id,image_path\n";
    for (const auto& [patient, image] : synth.images) {
      const std::string rel = "images/" + patient + ".pgm";
      write_file_atomic(out_dir / rel, encode_pgm(image));
      out << csv_field(patient) << ',' << rel << '\n';
    }
  }
  return files;
}

}  // namespace cxrprompt
