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

#include "cxrprompt/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <sstream>

#include <boost/tokenizer.hpp>
#include <json.hpp>

namespace cxrprompt {

using json = nlohmann::json;

namespace {

json confusion_json(const ConfusionMatrix& cm) {
  return json{{"tp", cm.tp}, {"fp", cm.fp},   {"fn", cm.fn},
              {"tn", cm.tn}, {"unparseable", cm.unparseable}, {"excluded", cm.excluded}};
}

ConfusionMatrix confusion_from(const json& j) {
  return ConfusionMatrix{j.at("tp").get<std::size_t>(),          j.at("fp").get<std::size_t>(),
                         j.at("fn").get<std::size_t>(),          j.at("tn").get<std::size_t>(),
                         j.at("unparseable").get<std::size_t>(), j.at("excluded").get<std::size_t>()};
}

json metrics_json(const std::optional<Metrics>& m) {
  if (!m) return nullptr;
  return json{{"precision", m->precision},
              {"recall", m->recall},
              {"f1", m->f1},
              {"accuracy", m->accuracy},
              {"weighted_f1", m->weighted_f1},
              {"precision_undefined", m->precision_undefined},
              {"recall_undefined", m->recall_undefined},
              {"f1_undefined", m->f1_undefined}};
}

std::optional<Metrics> metrics_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  Metrics m;
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.accuracy = j.at("accuracy").get<double>();
  m.weighted_f1 = j.at("weighted_f1").get<double>();
  m.precision_undefined = j.at("precision_undefined").get<bool>();
  m.recall_undefined = j.at("recall_undefined").get<bool>();
  m.f1_undefined = j.at("f1_undefined").get<bool>();
  return m;
}

json report_json(const Report& r) {
  json j;
  j["config"] = json::parse(config_to_json(r.config));
  j["confusion"] = confusion_json(r.confusion);
  j["metrics"] = metrics_json(r.metrics);
  j["per_label"] = json::object();
  for (const auto& [label, lr] : r.per_label) {
    j["per_label"][label] = json{{"confusion", confusion_json(lr.confusion)}, {"metrics", metrics_json(lr.metrics)}};
  }
  j["retained_histogram"] = json::object();
  for (const auto& [kept, count] : r.retained_histogram) j["retained_histogram"][std::to_string(kept)] = count;
  j["mean_retained"] = r.mean_retained();
  j["errors"] = json::array();
  for (const auto& e : r.errors) j["errors"].push_back(json{{"query_id", e.query_id}, {"message", e.message}});
  j["grounding_misses"] = r.grounding_misses;
  j["queries"] = json::array();
  for (const auto& q : r.queries) {
    json qj{{"query_id", q.query_id},
            {"label", q.label_name},
            {"gold", q.gold},
            {"prediction", to_string(q.prediction.outcome)},
            {"raw_text", q.prediction.raw_text},
            {"shots_offered", q.shots_offered},
            {"shots_kept", q.shots_kept},
            {"adjacent_shot_id", q.adjacent_shot_id},
            {"adjacent_score", q.adjacent_score},
            {"grounding_miss", q.grounding_miss}};
    qj["error"] = q.error ? json(*q.error) : json(nullptr);
    j["queries"].push_back(std::move(qj));
  }
  return j;
}

Prediction::Outcome parse_outcome(const std::string& s) {
  if (s == "positive") return Prediction::Outcome::kPositive;
  if (s == "negative") return Prediction::Outcome::kNegative;
  if (s == "unparseable") return Prediction::Outcome::kUnparseable;
  throw Error(ErrorCode::kSchemaError, "unknown prediction '" + s + "'");
}

Report report_from(const json& j) {
  Report r;
  r.config = config_from_json(j.at("config").dump());
  r.confusion = confusion_from(j.at("confusion"));
  r.metrics = metrics_from(j.at("metrics"));
  for (const auto& [label, lj] : j.at("per_label").items()) {
    r.per_label[label] = LabelReport{confusion_from(lj.at("confusion")), metrics_from(lj.at("metrics"))};
  }
  for (const auto& [kept, count] : j.at("retained_histogram").items()) {
    r.retained_histogram[std::stoul(kept)] = count.get<std::size_t>();
  }
  for (const auto& e : j.at("errors")) {
    r.errors.push_back(QueryError{e.at("query_id").get<std::string>(), e.at("message").get<std::string>()});
  }
  r.grounding_misses = j.at("grounding_misses").get<std::size_t>();
  for (const auto& qj : j.at("queries")) {
    QueryResult q;
    q.query_id = qj.at("query_id").get<std::string>();
    q.label_name = qj.at("label").get<std::string>();
    q.gold = qj.at("gold").get<int>();
    q.prediction = Prediction{parse_outcome(qj.at("prediction").get<std::string>()),
                              qj.at("raw_text").get<std::string>()};
    q.shots_offered = qj.at("shots_offered").get<std::size_t>();
    q.shots_kept = qj.at("shots_kept").get<std::size_t>();
    q.adjacent_shot_id = qj.at("adjacent_shot_id").get<std::string>();
    q.adjacent_score = qj.at("adjacent_score").get<double>();
    q.grounding_miss = qj.at("grounding_miss").get<bool>();
    if (!qj.at("error").is_null()) q.error = qj.at("error").get<std::string>();
    r.queries.push_back(std::move(q));
  }
  return r;
}

template <typename Fn>
auto parse_guarded(std::string_view text, const char* what, Fn fn) {
  try {
    return fn(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("invalid ") + what + " JSON: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorCode::kSchemaError, std::string("invalid ") + what + " JSON: " + e.what());
  }
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string on_off(bool b) { return b ? "on" : "off"; }

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string format_rows(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = header[c].size();
    for (const auto& row : rows) widths[c] = std::max(widths[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out += " | ";
      out += c + 1 == cells.size() ? cells[c] : pad(cells[c], widths[c]);
    }
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t rule = 0;
  for (std::size_t c = 0; c < widths.size(); ++c) rule += widths[c] + (c > 0 ? 3 : 0);
  out += std::string(rule, '-') + "\n";
  for (const auto& row : rows) out += line(row);
  return out;
}

std::vector<std::string> metric_cells(const Report& r) {
  if (!r.metrics) return {"n/a", "n/a", "n/a", "n/a"};
  return {fixed3(r.metrics->precision), fixed3(r.metrics->recall), fixed3(r.metrics->f1),
          fixed3(r.metrics->accuracy)};
}

const std::vector<std::string> kMetricHeader = {"Precision", "Recall", "F1-score", "Accuracy"};

std::string modality_title(Modality m) {
  switch (m) {
    case Modality::kText: return "Text";
    case Modality::kImage: return "Image";
    case Modality::kMultimodal: return "Multimodal";
  }
  return "?";
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

std::string report_to_json(const Report& report) { return report_json(report).dump(2) + "\n"; }

Report report_from_json(std::string_view text) {
  return parse_guarded(text, "report", [](const json& j) { return report_from(j); });
}

std::string sweep_to_json(const Sweep& sweep) {
  json j;
  j["axis"] = to_string(sweep.axis);
  j["points"] = json::array();
  for (const auto& p : sweep.points) j["points"].push_back(json{{"setting", p.setting}, {"report", report_json(p.report)}});
  return j.dump(2) + "\n";
}

Sweep sweep_from_json(std::string_view text) {
  return parse_guarded(text, "sweep", [](const json& j) {
    Sweep s;
    s.axis = parse_sweep_axis(j.at("axis").get<std::string>());
    for (const auto& p : j.at("points")) {
      s.points.push_back(SweepPoint{p.at("setting").get<std::string>(), report_from(p.at("report"))});
    }
    return s;
  });
}

std::string render_table(const Sweep& sweep) {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : sweep.points) {
    std::vector<std::string> row;
    const ExperimentConfig& c = p.report.config;
    switch (sweep.axis) {
      case SweepAxis::kGrid: row = {on_off(c.dps_enabled), on_off(c.vg_enabled)}; break;
      case SweepAxis::kShots: row = {std::to_string(c.shots) + "-shot"}; break;
      case SweepAxis::kModality: row = {modality_title(c.modality)}; break;
      case SweepAxis::kThreshold: row = {p.setting}; break;
    }
    for (auto& cell : metric_cells(p.report)) row.push_back(std::move(cell));
    if (sweep.axis == SweepAxis::kThreshold) row.push_back(fixed3(p.report.mean_retained()));
    rows.push_back(std::move(row));
  }
  switch (sweep.axis) {
    case SweepAxis::kGrid: header = {"DPS Setting", "VG Setting"}; break;
    case SweepAxis::kShots: header = {"Prompt Setting"}; break;
    case SweepAxis::kModality: header = {"DPS Modality"}; break;
    case SweepAxis::kThreshold: header = {"Threshold"}; break;
  }
  header.insert(header.end(), kMetricHeader.begin(), kMetricHeader.end());
  if (sweep.axis == SweepAxis::kThreshold) header.push_back("Mean Shots");
  return format_rows(header, rows);
}

std::string render_report(const Report& report) {
  const ExperimentConfig& c = report.config;
  std::vector<std::string> header = {"DPS Setting", "VG Setting"};
  header.insert(header.end(), kMetricHeader.begin(), kMetricHeader.end());
  std::vector<std::string> row = {on_off(c.dps_enabled), on_off(c.vg_enabled)};
  for (auto& cell : metric_cells(report)) row.push_back(std::move(cell));
  std::string out = format_rows(header, {row});

  out += "\n";
  std::vector<std::vector<std::string>> label_rows;
  for (const auto& [label, lr] : report.per_label) {
    std::vector<std::string> r = {label};
    if (lr.metrics) {
      for (double v : {lr.metrics->precision, lr.metrics->recall, lr.metrics->f1, lr.metrics->accuracy}) {
        r.push_back(fixed3(v));
      }
    } else {
      r.insert(r.end(), 4, "n/a");
    }
    r.push_back(std::to_string(lr.confusion.total()));
    label_rows.push_back(std::move(r));
  }
  std::vector<std::string> label_header = {"Label"};
  label_header.insert(label_header.end(), kMetricHeader.begin(), kMetricHeader.end());
  label_header.push_back("Queries");
  out += format_rows(label_header, label_rows);

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "\nqueries=%zu errors=%zu unparseable=%zu grounding_misses=%zu mean_shots=%.3f weighted_f1=%s\n",
                report.queries.size(), report.errors.size(), report.confusion.unparseable,
                report.grounding_misses, report.mean_retained(),
                report.metrics ? fixed3(report.metrics->weighted_f1).c_str() : "n/a");
  return out + buf;
}

std::string sweep_to_csv(const Sweep& sweep) {
  std::ostringstream out;
  out << "axis,setting,dps_enabled,vg_enabled,modality,threshold,shots,precision,recall,f1,weighted_f1,"
         "accuracy,mean_retained,queries,errors\n";
  for (const auto& p : sweep.points) {
    const ExperimentConfig& c = p.report.config;
    const auto& m = p.report.metrics;
    auto metric = [&](double Metrics::*field) { return m ? format_value((*m).*field) : std::string(); };
    out << to_string(sweep.axis) << ',' << csv_escape(p.setting) << ',' << c.dps_enabled << ',' << c.vg_enabled
        << ',' << to_string(c.modality) << ',' << format_value(c.threshold) << ',' << c.shots << ','
        << metric(&Metrics::precision) << ',' << metric(&Metrics::recall) << ',' << metric(&Metrics::f1) << ','
        << metric(&Metrics::weighted_f1) << ',' << metric(&Metrics::accuracy) << ','
        << format_value(p.report.mean_retained()) << ',' << p.report.queries.size() << ','
        << p.report.errors.size() << '\n';
  }
  return out.str();
}

std::vector<double> SweepTable::numeric(const std::string& column) const {
  if (std::find(columns.begin(), columns.end(), column) == columns.end()) {
    throw Error(ErrorCode::kSchemaError, "sweep CSV has no column '" + column + "'");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string& cell = rows[i].at(column);
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kSchemaError,
                  "sweep CSV row " + std::to_string(i + 2) + ": '" + column + "' is not a number");
    }
  }
  return out;
}

SweepTable read_sweep_csv(std::istream& in) {
  using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  const boost::escaped_list_separator<char> sep('\\', ',', '"');
  auto split = [&](const std::string& line) {
    Tokenizer tok(line, sep);
    return std::vector<std::string>(tok.begin(), tok.end());
  };
  SweepTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kSchemaError, "sweep CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.columns = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    try {
      cells = split(line);
    } catch (const boost::escaped_list_error& e) {
      throw Error(ErrorCode::kSchemaError, "sweep CSV line " + std::to_string(lineno) + ": " + e.what());
    }
    if (cells.size() != table.columns.size()) {
      throw Error(ErrorCode::kSchemaError, "sweep CSV line " + std::to_string(lineno) + ": expected " +
                                               std::to_string(table.columns.size()) + " fields");
    }
    std::map<std::string, std::string> row;
    for (std::size_t c = 0; c < cells.size(); ++c) row[table.columns[c]] = cells[c];
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string line_chart_svg(const SweepTable& table, const ChartOptions& options) {
  if (table.rows.empty()) throw Error(ErrorCode::kEmptyInput, "nothing to plot");
  const std::vector<double> xs = table.numeric(options.x_column);
  const auto [xmin_it, xmax_it] = std::minmax_element(xs.begin(), xs.end());
  double xmin = *xmin_it;
  double xmax = *xmax_it;
  if (xmax == xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }

  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - std::clamp(y, 0.0, 1.0)) * ph; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  auto escape = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '<') out += "&lt;";
      else if (c == '>') out += "&gt;";
      else if (c == '&') out += "&amp;";
      else out += c;
    }
    return out;
  };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(options.title) << "</text>\n";
  }
  // Axes.
  svg << "<g id=\"axes\" stroke=\"black\">\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
      << "\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph << "\"/>\n";
  svg << "</g>\n";
  std::vector<double> xticks = xs;
  std::sort(xticks.begin(), xticks.end());
  xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
  for (double x : xticks) {
    svg << "<line x1=\"" << num(px(x)) << "\" y1=\"" << kTop + ph << "\" x2=\"" << num(px(x)) << "\" y2=\""
        << kTop + ph + 5 << "\" stroke=\"black\"/>";
    svg << "<text x=\"" << num(px(x)) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
        << format_value(x) << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double y = i / 5.0;
    svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(py(y)) << "\" x2=\"" << kLeft << "\" y2=\"" << num(py(y))
        << "\" stroke=\"black\"/>";
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << num(py(y)) << "\" x2=\"" << kLeft + pw << "\" y2=\""
        << num(py(y)) << "\" stroke=\"#dddddd\"/>";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">" << num(y)
        << "</text>\n";
  }
  svg << "<text id=\"x-label\" x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">"
      << escape(options.x_label) << "</text>\n";
  svg << "<text id=\"y-label\" x=\"18\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << kTop + ph / 2 << ")\">" << escape(options.y_label) << "</text>\n";

  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });

  for (std::size_t s = 0; s < options.y_columns.size(); ++s) {
    const std::string& col = options.y_columns[s];
    const std::vector<double> ys = table.numeric(col);
    const char* color = kColors[s % std::size(kColors)];
    svg << "<polyline class=\"series\" data-column=\"" << escape(col) << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (k > 0) svg << ' ';
      svg << num(px(xs[order[k]])) << ',' << num(py(ys[order[k]]));
    }
    svg << "\"/>\n";
    for (std::size_t i : order) {
      svg << "<circle cx=\"" << num(px(xs[i])) << "\" cy=\"" << num(py(ys[i])) << "\" r=\"3\" fill=\"" << color
          << "\"/>";
    }
    svg << "\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(s);
    svg << "<line x1=\"" << kLeft + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 35 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
    svg << "<text x=\"" << kLeft + pw + 40 << "\" y=\"" << ly + 4 << "\">" << escape(col) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace cxrprompt
