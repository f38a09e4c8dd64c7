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

#include "cxrprompt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>

#include <boost/tokenizer.hpp>
#include <json.hpp>

#include "cxrprompt/log.hpp"
#include "cxrprompt/rng.hpp"

namespace cxrprompt {

using nlohmann::json;

void FeatureMatrix::add(const ChartEventRow& row) {
  if (!std::isfinite(row.value)) {
    throw Error(ErrorCode::kMalformedRow, "non-finite value for '" + row.label + "'");
  }
  auto key = std::make_pair(row.patient_id, row.label);
  if (patient_set_.insert(row.patient_id).second) patients_.push_back(row.patient_id);
  if (feature_set_.insert(row.label).second) features_.push_back(row.label);
  cells_[std::move(key)] = FeatureCell{row.value, row.unit, row.low, row.high};
}

const FeatureCell* FeatureMatrix::cell(const std::string& patient, const std::string& feature) const {
  const auto it = cells_.find({patient, feature});
  return it == cells_.end() ? nullptr : &it->second;
}

std::vector<std::optional<double>> FeatureMatrix::column(const std::string& feature,
                                                         std::span<const std::string> patients) const {
  std::vector<std::optional<double>> out;
  out.reserve(patients.size());
  for (const auto& p : patients) {
    const FeatureCell* c = cell(p, feature);
    out.push_back(c ? std::optional<double>(c->value) : std::nullopt);
  }
  return out;
}

FeatureMatrix ingest_chartevents(std::span<const ChartEventRow> rows) {
  FeatureMatrix m;
  for (const auto& r : rows) m.add(r);
  return m;
}

namespace {

using CsvTokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  CsvTokenizer tok(line);
  for (const auto& f : tok) fields.push_back(trim(f));
  return fields;
}

bool is_missing(const std::string& field) { return field.empty() || field == "-"; }

double parse_double(const std::string& field, const char* what) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw Error(ErrorCode::kMalformedRow, std::string(what) + " '" + field + "' is not a number");
  }
  return v;
}

std::optional<double> parse_optional(const std::string& field, const char* what) {
  if (is_missing(field)) return std::nullopt;
  return parse_double(field, what);
}

// Reads the header line and checks it names exactly the expected columns.
void expect_header(std::istream& in, const std::vector<std::string>& expected, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kSchemaError, std::string(what) + ": missing header");
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  if (split_csv(line) != expected) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw Error(ErrorCode::kSchemaError, std::string(what) + ": header must be '" + want + "'");
  }
}

}  // namespace

ChartEventsCsv read_chartevents_csv(std::istream& in) {
  expect_header(in, {"patient_id", "label", "value", "unit", "low", "high"}, "chartevents");
  ChartEventsCsv out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      std::vector<std::string> f;
      try {
        f = split_csv(line);
      } catch (const boost::escaped_list_error& e) {
        throw Error(ErrorCode::kMalformedRow, e.what());
      }
      if (f.size() != 6) {
        throw Error(ErrorCode::kMalformedRow, "expected 6 fields, got " + std::to_string(f.size()));
      }
      if (f[0].empty() || f[1].empty()) throw Error(ErrorCode::kMalformedRow, "empty patient_id or label");
      if (is_missing(f[2])) throw Error(ErrorCode::kMalformedRow, "missing value");
      ChartEventRow row{f[0], f[1], parse_double(f[2], "value"), f[3] == "-" ? "" : f[3],
                        parse_optional(f[4], "low"), parse_optional(f[5], "high")};
      if (row.low && row.high && *row.low > *row.high) throw Error(ErrorCode::kMalformedRow, "low > high");
      out.matrix.add(row);
    } catch (const Error& e) {
      out.malformed.push_back({line_no, e.what()});
      logger()->warn("event=malformed_row line={} reason=\"{}\"", line_no, e.what());
    }
  }
  return out;
}

PearsonResult pearson(std::span<const std::optional<double>> x, std::span<const std::optional<double>> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "pearson inputs have lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] && y[i]) {
      xs.push_back(*x[i]);
      ys.push_back(*y[i]);
    }
  }
  return pearson(std::span<const double>(xs), std::span<const double>(ys));
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "pearson inputs have lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
  PearsonResult result;
  result.pairs = x.size();
  if (x.size() < 2) throw Error(ErrorCode::kInsufficientData, "pearson needs at least 2 complete pairs");

  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
  };
  if (constant(x) || constant(y)) {
    result.constant_column = true;
    return result;
  }

  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  result.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return result;
}

FeatureSelection select_features(const FeatureMatrix& matrix, const LabelColumn& labels, std::size_t k,
                                 RankBy rank_by) {
  std::vector<std::string> patients;
  std::vector<std::optional<double>> y;
  for (const auto& [patient, label] : labels) {
    if (label != 0 && label != 1) {
      throw Error(ErrorCode::kInvalidArgument, "label for patient '" + patient + "' is not binary");
    }
    patients.push_back(patient);
    y.emplace_back(static_cast<double>(label));
  }

  FeatureSelection out;
  std::vector<RankedFeature> ranked;
  for (const auto& feature : matrix.features()) {
    const auto x = matrix.column(feature, patients);
    try {
      const auto r = pearson(std::span<const std::optional<double>>(x), std::span<const std::optional<double>>(y));
      if (r.constant_column) {
        out.constant.push_back(feature);
      } else {
        ranked.push_back({feature, r.r});
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInsufficientData) throw;
      out.insufficient.push_back(feature);
    }
  }
  auto key = [rank_by](const RankedFeature& f) { return rank_by == RankBy::kAbsolute ? std::fabs(f.r) : f.r; };
  std::sort(ranked.begin(), ranked.end(), [&](const RankedFeature& a, const RankedFeature& b) {
    if (key(a) != key(b)) return key(a) > key(b);
    return a.name < b.name;
  });
  if (ranked.size() > k) ranked.resize(k);
  out.selected = std::move(ranked);
  return out;
}

std::string format_value(double value) {
  if (value == 0.0) return "0";
  char buf[512];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
  if (ec != std::errc()) throw Error(ErrorCode::kInvalidArgument, "cannot format value");
  return std::string(buf, ptr);
}

std::string serialize_features(std::span<const LabFeature> features) {
  std::string out;
  for (const auto& f : features) {
    if (!std::isfinite(f.value)) continue;
    if (!out.empty()) out += ", ";
    out += format_value(f.value);
    if (!f.unit.empty()) {
      out += ' ';
      out += f.unit;
    }
    out += ' ';
    out += f.label;
  }
  return out;
}

std::string_view to_string(Split s) { return s == Split::kCandidate ? "candidate" : "query"; }

std::vector<const DatasetRecord*> VqaDataset::for_label(const std::string& label, Split split) const {
  std::vector<const DatasetRecord*> out;
  for (const auto& r : records) {
    if (r.split == split && r.record.label_name() == label) out.push_back(&r);
  }
  return out;
}

VqaDataset build_dataset(const FeatureMatrix& matrix, const LabelTable& labels, const ImageIndex& images,
                         std::size_t k, const SplitConfig& split, std::uint64_t seed, std::string source,
                         RankBy rank_by) {
  if (split.pool_size < 2) throw Error(ErrorCode::kInvalidArgument, "pool size must be >= 2");
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "feature cap k must be >= 1");

  VqaDataset ds;
  ds.seed = seed;
  ds.source = std::move(source);

  for (const auto& [condition, column] : labels) {
    condition_index(condition);  // rejects names outside the vocabulary
    const FeatureSelection selection = select_features(matrix, column, k, rank_by);

    std::vector<Record> records;
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
    for (const auto& [patient, label] : column) {
      const auto img = images.find(patient);
      if (img == images.end() || img->second.empty()) {
        throw Error(ErrorCode::kMissingImage, "patient '" + patient + "' has no image reference");
      }
      std::vector<LabFeature> features;
      for (const auto& f : selection.selected) {
        if (const FeatureCell* c = matrix.cell(patient, f.name)) {
          features.push_back(LabFeature{f.name, c->value, c->unit, c->low, c->high});
        }
      }
      (label == 1 ? positives : negatives).push_back(records.size());
      records.emplace_back(patient + "/" + condition, img->second.front(), std::move(features), condition, label);
    }

    if (positives.empty() || negatives.empty()) {
      throw Error(ErrorCode::kInsufficientClassExamples,
                  "'" + condition + "' needs at least one positive and one negative example");
    }
    if (records.size() <= split.pool_size) {
      throw Error(ErrorCode::kInsufficientClassExamples,
                  "'" + condition + "' has " + std::to_string(records.size()) +
                      " records, not enough for a pool of " + std::to_string(split.pool_size) + " plus queries");
    }

    SeededRng rng(mix_seed(seed, condition));
    rng.shuffle(std::span<std::size_t>(positives));
    rng.shuffle(std::span<std::size_t>(negatives));
    std::vector<bool> in_pool(records.size(), false);
    in_pool[positives.front()] = true;
    in_pool[negatives.front()] = true;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!in_pool[i]) rest.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(rest));
    for (std::size_t i = 0; i + 2 < split.pool_size; ++i) in_pool[rest[i]] = true;

    std::set<std::string> pool_features;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!in_pool[i]) continue;
      for (const auto& f : records[i].features()) pool_features.insert(f.label);
    }

    LabelSummary summary;
    for (const auto& f : selection.selected) summary.features.push_back(f.name);
    summary.positives = positives.size();
    summary.negatives = negatives.size();
    for (std::size_t i = 0; i < records.size(); ++i) {
      const Record& r = records[i];
      if (in_pool[i]) {
        ++summary.candidates;
        ds.records.push_back({r, Split::kCandidate});
        continue;
      }
      std::vector<LabFeature> covered;
      for (const auto& f : r.features()) {
        if (pool_features.contains(f.label)) covered.push_back(f);
      }
      ++summary.queries;
      ds.records.push_back({Record(r.id(), r.image_ref(), std::move(covered), r.label_name(), r.label()),
                            Split::kQuery});
    }
    ds.labels[condition] = std::move(summary);
  }
  return ds;
}

ImageIndex read_image_index_csv(std::istream& in, const std::filesystem::path& base_dir) {
  expect_header(in, {"patient_id", "image_path"}, "image index");
  ImageIndex index;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      throw Error(ErrorCode::kSchemaError, "image index line " + std::to_string(line_no) + " is malformed");
    }
    std::filesystem::path p(f[1]);
    if (p.is_relative()) p = (base_dir / p).lexically_normal();
    index[f[0]].push_back(p.string());
  }
  return index;
}

LabelTable read_labels_csv(std::istream& in) {
  expect_header(in, {"patient_id", "condition", "label"}, "labels");
  LabelTable table;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 3 || f[0].empty() || (f[2] != "0" && f[2] != "1")) {
      throw Error(ErrorCode::kSchemaError, "labels line " + std::to_string(line_no) + " is malformed");
    }
    if (!is_known_condition(f[1])) {
      throw Error(ErrorCode::kUnknownLabel, "labels line " + std::to_string(line_no) + ": '" + f[1] + "'");
    }
    table[f[1]][f[0]] = f[2] == "1" ? 1 : 0;
  }
  return table;
}

namespace {

json feature_to_json(const LabFeature& f) {
  json j{{"label", f.label}, {"value", f.value}, {"unit", f.unit}};
  if (f.low) j["low"] = *f.low;
  if (f.high) j["high"] = *f.high;
  return j;
}

LabFeature feature_from_json(const json& j) {
  LabFeature f;
  f.label = j.at("label").get<std::string>();
  f.value = j.at("value").get<double>();
  f.unit = j.value("unit", "");
  if (j.contains("low") && !j["low"].is_null()) f.low = j["low"].get<double>();
  if (j.contains("high") && !j["high"].is_null()) f.high = j["high"].get<double>();
  return f;
}

}  // namespace

std::string record_to_jsonl(const DatasetRecord& r) {
  json features = json::array();
  for (const auto& f : r.record.features()) features.push_back(feature_to_json(f));
  const json j{{"id", r.record.id()},
               {"image_ref", r.record.image_ref()},
               {"label_name", r.record.label_name()},
               {"label", r.record.label()},
               {"features", std::move(features)},
               {"split", to_string(r.split)}};
  return j.dump();
}

DatasetRecord record_from_jsonl(std::string_view line) {
  try {
    const json j = json::parse(line);
    std::vector<LabFeature> features;
    for (const auto& f : j.at("features")) features.push_back(feature_from_json(f));
    const std::string split = j.at("split").get<std::string>();
    if (split != "candidate" && split != "query") {
      throw Error(ErrorCode::kSchemaError, "split must be 'candidate' or 'query'");
    }
    return DatasetRecord{Record(j.at("id").get<std::string>(), j.at("image_ref").get<std::string>(),
                                std::move(features), j.at("label_name").get<std::string>(),
                                j.at("label").get<int>()),
                         split == "candidate" ? Split::kCandidate : Split::kQuery};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kSchemaError, e.what());
  }
}

std::filesystem::path default_manifest_path(const std::filesystem::path& jsonl) {
  auto p = jsonl;
  p += ".manifest.json";
  return p;
}

void write_dataset(const VqaDataset& ds, const std::filesystem::path& jsonl,
                   const std::filesystem::path& manifest) {
  for (const auto& p : {jsonl, manifest}) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  }
  {
    std::ofstream out(jsonl, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + jsonl.string() + "'");
    for (const auto& r : ds.records) out << record_to_jsonl(r) << '\n';
  }
  json labels = json::object();
  for (const auto& [name, s] : ds.labels) {
    labels[name] = json{{"features", s.features},
                        {"positives", s.positives},
                        {"negatives", s.negatives},
                        {"candidates", s.candidates},
                        {"queries", s.queries}};
  }
  const json m{{"builder_version", kBuilderVersion},
               {"seed", ds.seed},
               {"source", ds.source},
               {"record_count", ds.records.size()},
               {"labels", std::move(labels)}};
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + manifest.string() + "'");
  out << m.dump(2) << '\n';
}

VqaDataset read_dataset(const std::filesystem::path& jsonl, const std::filesystem::path& manifest) {
  std::ifstream in(jsonl, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open dataset '" + jsonl.string() + "'");
  VqaDataset ds;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      ds.records.push_back(record_from_jsonl(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchemaError, jsonl.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(ds.records.back().record.id()).second) {
      throw Error(ErrorCode::kSchemaError, jsonl.string() + ":" + std::to_string(line_no) + ": duplicate id '" +
                                               ds.records.back().record.id() + "'");
    }
  }

  std::ifstream min(manifest, std::ios::binary);
  if (min) {
    try {
      const json m = json::parse(min);
      ds.seed = m.at("seed").get<std::uint64_t>();
      ds.source = m.at("source").get<std::string>();
      for (const auto& [name, s] : m.at("labels").items()) {
        LabelSummary summary;
        summary.features = s.at("features").get<std::vector<std::string>>();
        summary.positives = s.at("positives").get<std::size_t>();
        summary.negatives = s.at("negatives").get<std::size_t>();
        summary.candidates = s.at("candidates").get<std::size_t>();
        summary.queries = s.at("queries").get<std::size_t>();
        ds.labels[name] = std::move(summary);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kSchemaError, manifest.string() + ": " + e.what());
    }
    return ds;
  }

  // No manifest: rebuild the summaries from the records themselves.
  for (const auto& r : ds.records) {
    auto& s = ds.labels[r.record.label_name()];
    (r.record.label() == 1 ? s.positives : s.negatives) += 1;
    (r.split == Split::kCandidate ? s.candidates : s.queries) += 1;
    for (const auto& f : r.record.features()) {
      if (std::find(s.features.begin(), s.features.end(), f.label) == s.features.end()) {
        s.features.push_back(f.label);
      }
    }
  }
  return ds;
}

}  // namespace cxrprompt
