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

#include "cxrprompt/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cxrprompt/backends.hpp"
#include "cxrprompt/dataset.hpp"
#include "cxrprompt/eval.hpp"
#include "cxrprompt/image.hpp"
#include "cxrprompt/log.hpp"
#include "cxrprompt/mock_server.hpp"
#include "cxrprompt/report.hpp"
#include "cxrprompt/synth.hpp"

namespace cxrprompt {

namespace {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  return in;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "'" + item + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

// Options shared by run and sweep. Precedence: defaults, then --config, then
// flags given explicitly.
struct RunOptions {
  std::string dataset;
  std::string manifest;
  std::string config_file;
  std::string backend = "mock";
  std::uint64_t seed = 0;
  double threshold = 0.7;
  std::size_t shots = 6;
  bool dps = true;
  bool vg = true;
  std::string modality = "multimodal";
  std::string template_kind = "image_ehr_text";
  std::string unparseable = "count_incorrect";
  int padding = 0;
  std::size_t concurrency = 4;
  std::string crop_dir = "crops";
  std::size_t dim = 64;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* threshold_opt = nullptr;
  CLI::Option* shots_opt = nullptr;
  CLI::Option* dps_opt = nullptr;
  CLI::Option* vg_opt = nullptr;
  CLI::Option* modality_opt = nullptr;
  CLI::Option* template_opt = nullptr;
  CLI::Option* unparseable_opt = nullptr;
  CLI::Option* padding_opt = nullptr;
  CLI::Option* concurrency_opt = nullptr;
  CLI::Option* crop_dir_opt = nullptr;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--dataset", dataset, "Dataset JSONL")->required();
    cmd->add_option("--manifest", manifest, "Manifest path (default <dataset>.manifest.json)");
    cmd->add_option("--config", config_file, "Experiment config JSON");
    cmd->add_option("--backend", backend, "mock or http:<base-url>");
    cmd->add_option("--dim", dim, "Mock embedding dimension")->check(CLI::PositiveNumber);
    seed_opt = cmd->add_option("--seed", seed, "Seed for sampling, ordering and mock models");
    threshold_opt = cmd->add_option("--threshold", threshold, "DPS similarity threshold")->check(CLI::Range(-1.0, 1.0));
    shots_opt = cmd->add_option("--shots", shots, "Candidate shots offered per query")->check(CLI::PositiveNumber);
    dps_opt = cmd->add_flag("--dps,!--no-dps", dps, "Dynamic proximity selection");
    vg_opt = cmd->add_flag("--vg,!--no-vg", vg, "Visual grounding");
    modality_opt = cmd->add_option("--modality", modality, "DPS similarity modality")
                       ->check(CLI::IsMember({"text", "image", "multimodal"}));
    template_opt = cmd->add_option("--template", template_kind, "Prompt template")
                       ->check(CLI::IsMember({"image_text", "ehr_text", "image_ehr_text"}));
    unparseable_opt = cmd->add_option("--unparseable", unparseable, "Unparseable answer policy")
                          ->check(CLI::IsMember({"count_incorrect", "exclude"}));
    padding_opt = cmd->add_option("--padding", padding, "Crop padding in pixels")->check(CLI::NonNegativeNumber);
    concurrency_opt = cmd->add_option("--concurrency", concurrency, "Queries in flight")->check(CLI::PositiveNumber);
    crop_dir_opt = cmd->add_option("--crop-dir", crop_dir, "Where grounded crops are written");
  }

  [[nodiscard]] ExperimentConfig config() const {
    ExperimentConfig c;
    if (!config_file.empty()) c = config_from_json(read_text(config_file), c);
    if (*seed_opt) c.seed = seed;
    if (*threshold_opt) c.threshold = threshold;
    if (*shots_opt) c.shots = shots;
    if (*dps_opt) c.dps_enabled = dps;
    if (*vg_opt) c.vg_enabled = vg;
    if (*modality_opt) c.modality = parse_modality(modality);
    if (*template_opt) c.template_kind = parse_template(template_kind);
    if (*unparseable_opt) c.unparseable_policy = parse_unparseable_policy(unparseable);
    if (*padding_opt) c.padding_px = padding;
    if (*concurrency_opt) c.concurrency = concurrency;
    if (*crop_dir_opt) c.crop_dir = crop_dir;
    c.validate();
    return c;
  }

  [[nodiscard]] VqaDataset load() const {
    const fs::path m = manifest.empty() ? default_manifest_path(dataset) : fs::path(manifest);
    return read_dataset(dataset, m);
  }
};

int exit_code_for(ErrorCode code) { return is_backend_error(code) ? kExitBackend : kExitData; }

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot multimodal prompting pipeline for chest X-ray findings", "cxrprompt"};
  app.require_subcommand(1);

  // synth-data
  SynthConfig synth;
  std::string synth_out;
  std::string synth_labels;
  std::size_t synth_n_labels = 0;
  auto* synth_cmd = app.add_subcommand("synth-data", "Write a seeded synthetic chartevents/labels/images fixture");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Seed");
  synth_cmd->add_option("--patients", synth.n_patients, "Number of patients");
  synth_cmd->add_option("--features", synth.n_features, "Number of lab features");
  synth_cmd->add_option("--labels", synth_labels, "Comma-separated conditions");
  synth_cmd->add_option("--n-labels", synth_n_labels, "Use the first N conditions of the vocabulary")
      ->check(CLI::Range(1, static_cast<int>(kConditions.size())));
  synth_cmd->add_option("--missingness", synth.missingness, "Probability a lab cell is absent");

  // build-dataset
  std::string bd_chartevents, bd_images, bd_labels, bd_out, bd_manifest, bd_rank = "abs";
  std::size_t bd_k = 10;
  SplitConfig bd_split;
  std::uint64_t bd_seed = 0;
  auto* build_cmd = app.add_subcommand("build-dataset", "Chartevents CSV to in-context VQA JSONL");
  build_cmd->add_option("--chartevents", bd_chartevents, "patient_id,label,value,unit,low,high CSV")->required();
  build_cmd->add_option("--images", bd_images, "patient_id,image_path CSV")->required();
  build_cmd->add_option("--labels", bd_labels, "patient_id,condition,label CSV")->required();
  build_cmd->add_option("--out", bd_out, "Output JSONL")->required();
  build_cmd->add_option("--manifest", bd_manifest, "Manifest path (default <out>.manifest.json)");
  build_cmd->add_option("--k", bd_k, "Features kept per label")->check(CLI::PositiveNumber);
  build_cmd->add_option("--pool-size", bd_split.pool_size, "Candidates per label")->check(CLI::Range(2, 1000000));
  build_cmd->add_option("--seed", bd_seed, "Seed for the candidate/query split");
  build_cmd->add_option("--rank-by", bd_rank, "Correlation ranking")->check(CLI::IsMember({"abs", "signed"}));

  // run
  RunOptions run_opts;
  std::string run_out = "report.json";
  auto* run_cmd = app.add_subcommand("run", "Run one experiment");
  run_opts.add_to(run_cmd);
  run_cmd->add_option("--out", run_out, "Report JSON path")->capture_default_str();

  // sweep
  RunOptions sweep_opts;
  std::string sweep_axis, sweep_values, sweep_out, sweep_csv, sweep_svg;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an ablation sweep");
  sweep_opts.add_to(sweep_cmd);
  sweep_cmd->add_option("--axis", sweep_axis, "shots, threshold, modality or grid")
      ->required()
      ->check(CLI::IsMember({"shots", "threshold", "modality", "grid"}));
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated axis values");
  sweep_cmd->add_option("--out", sweep_out, "Sweep JSON path");
  sweep_cmd->add_option("--csv", sweep_csv, "Sweep CSV path");
  sweep_cmd->add_option("--svg", sweep_svg, "Line chart of the sweep (threshold and shots axes)");

  // report
  std::string rep_input, rep_csv, rep_svg, rep_x, rep_title;
  auto* report_cmd = app.add_subcommand("report", "Render stored results as tables or a chart");
  report_cmd->add_option("--input", rep_input, "Report or sweep JSON to render as a table");
  report_cmd->add_option("--csv", rep_csv, "Sweep CSV to plot");
  report_cmd->add_option("--svg", rep_svg, "SVG output for --csv");
  report_cmd->add_option("--x", rep_x, "CSV column on the x axis (default threshold)");
  report_cmd->add_option("--title", rep_title, "Chart title");

  // serve-mock
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  MockConfig serve_config;
  auto* serve_cmd = app.add_subcommand("serve-mock", "Serve the mock backends over the wire protocol");
  serve_cmd->add_option("--host", serve_host, "Bind address");
  serve_cmd->add_option("--port", serve_port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--seed", serve_config.seed, "Mock seed");
  serve_cmd->add_option("--dim", serve_config.embedding_dim, "Embedding dimension")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*synth_cmd) {
      if (!synth_labels.empty() && synth_n_labels > 0) {
        err << "--labels and --n-labels are mutually exclusive\n";
        return kExitUsage;
      }
      if (!synth_labels.empty()) synth.labels = split_list(synth_labels);
      if (synth_n_labels > 0) synth.labels.assign(kConditions.begin(), kConditions.begin() + synth_n_labels);
      const SynthOutput data = synth_generate(synth);
      const SynthFiles files = write_synth(data, synth_out);
      nlohmann::json planted(data.planted);
      write_text(fs::path(synth_out) / "planted.json", planted.dump(2) + "\n");
      out << "chartevents=" << files.chartevents.string() << "\nlabels=" << files.labels.string()
          << "\nimages=" << files.images.string() << "\n";
      return kExitOk;
    }

    if (*build_cmd) {
      auto ce_in = open_input(bd_chartevents);
      ChartEventsCsv ce = read_chartevents_csv(ce_in);
      for (const auto& m : ce.malformed) {
        logger()->warn("event=malformed_row file={} line={} error=\"{}\"", bd_chartevents, m.line, m.message);
      }
      auto img_in = open_input(bd_images);
      const ImageIndex images = read_image_index_csv(img_in, fs::path(bd_images).parent_path());
      auto lab_in = open_input(bd_labels);
      const LabelTable labels = read_labels_csv(lab_in);
      VqaDataset ds = build_dataset(ce.matrix, labels, images, bd_k, bd_split, bd_seed,
                                    fs::path(bd_chartevents).filename().string(),
                                    bd_rank == "signed" ? RankBy::kSigned : RankBy::kAbsolute);
      const fs::path manifest = bd_manifest.empty() ? default_manifest_path(bd_out) : fs::path(bd_manifest);
      write_dataset(ds, bd_out, manifest);
      out << "records=" << ds.records.size() << " labels=" << ds.labels.size()
          << " malformed_rows=" << ce.malformed.size() << "\n";
      for (const auto& [label, s] : ds.labels) {
        out << label << ": features=" << s.features.size() << " positives=" << s.positives
            << " negatives=" << s.negatives << " candidates=" << s.candidates << " queries=" << s.queries << "\n";
      }
      return kExitOk;
    }

    if (*run_cmd) {
      const ExperimentConfig config = run_opts.config();
      const VqaDataset ds = run_opts.load();
      const BackendSet backends = make_backends(run_opts.backend, config.seed, run_opts.dim);
      const Report report = run_experiment(config, ds, backends);
      write_text(run_out, report_to_json(report));
      out << render_report(report);
      return report.errors.empty() ? kExitOk : kExitBackend;
    }

    if (*sweep_cmd) {
      const ExperimentConfig base = sweep_opts.config();
      const SweepAxis axis = parse_sweep_axis(sweep_axis);
      const std::vector<double> values =
          sweep_values.empty() ? default_sweep_values(axis) : parse_values(sweep_values);
      const VqaDataset ds = sweep_opts.load();
      const BackendSet backends = make_backends(sweep_opts.backend, base.seed, sweep_opts.dim);
      const Sweep result{axis, sweep(axis, values, base, ds, backends)};
      if (!sweep_out.empty()) write_text(sweep_out, sweep_to_json(result));
      const std::string csv = sweep_to_csv(result);
      if (!sweep_csv.empty()) write_text(sweep_csv, csv);
      if (!sweep_svg.empty()) {
        if (axis != SweepAxis::kThreshold && axis != SweepAxis::kShots) {
          err << "--svg needs a numeric axis (threshold or shots)\n";
          return kExitUsage;
        }
        std::istringstream csv_in(csv);
        ChartOptions chart;
        if (axis == SweepAxis::kShots) {
          chart.x_column = "shots";
          chart.x_label = "Shots";
        }
        write_text(sweep_svg, line_chart_svg(read_sweep_csv(csv_in), chart));
      }
      out << render_table(result);
      const bool any_errors = std::any_of(result.points.begin(), result.points.end(),
                                          [](const SweepPoint& p) { return !p.report.errors.empty(); });
      return any_errors ? kExitBackend : kExitOk;
    }

    if (*report_cmd) {
      if (rep_input.empty() && rep_csv.empty()) {
        err << "report needs --input or --csv\n";
        return kExitUsage;
      }
      if (!rep_input.empty()) {
        const std::string text = read_text(rep_input);
        bool is_sweep = false;
        try {
          const auto j = nlohmann::json::parse(text);
          is_sweep = j.is_object() && j.contains("axis");
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::kSchemaError, rep_input + ": " + e.what());
        }
        out << (is_sweep ? render_table(sweep_from_json(text)) : render_report(report_from_json(text)));
      }
      if (!rep_csv.empty()) {
        if (rep_svg.empty()) {
          err << "--csv needs --svg\n";
          return kExitUsage;
        }
        auto in = open_input(rep_csv);
        const SweepTable table = read_sweep_csv(in);
        ChartOptions chart;
        chart.title = rep_title;
        if (!rep_x.empty()) {
          chart.x_column = rep_x;
          chart.x_label = rep_x == "shots" ? "Shots" : rep_x;
        }
        write_text(rep_svg, line_chart_svg(table, chart));
        out << "wrote " << rep_svg << "\n";
      }
      return kExitOk;
    }

    if (*serve_cmd) {
      MockServer server(serve_config);
      const int port = server.bind(serve_host, serve_port);
      out << "listening on " << serve_host << ":" << port << std::endl;
      logger()->info("event=serve_mock host={} port={} dim={}", serve_host, port, serve_config.embedding_dim);
      server.serve();
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace cxrprompt
