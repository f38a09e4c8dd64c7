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

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cxrprompt/cli.hpp"
#include "cxrprompt/image.hpp"
#include "cxrprompt/report.hpp"
#include "helpers.hpp"

using namespace cxrprompt;
using cxrprompt::testing::TempDir;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  const auto bytes = read_file_bytes(p.string());
  return {bytes.begin(), bytes.end()};
}

}  // namespace

TEST_CASE("usage errors") {
  const Result unknown = cli({"run", "--dataset", "x.jsonl", "--bogus"});
  CHECK(unknown.code == kExitUsage);
  CHECK(unknown.err.find("--bogus") != std::string::npos);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"run", "--dataset", "x.jsonl", "--modality", "audio"}).code == kExitUsage);
  const Result help = cli({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("build-dataset") != std::string::npos);
  CHECK(cli({"sweep", "--help"}).code == kExitOk);
}

TEST_CASE("missing inputs are data errors") {
  TempDir dir("cli_missing");
  const std::string path = (dir / "absent.jsonl").string();
  const Result r = cli({"run", "--dataset", path});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("absent.jsonl") != std::string::npos);
  const Result b = cli({"build-dataset", "--chartevents", path, "--images", path, "--labels", path, "--out",
                        (dir / "o.jsonl").string()});
  CHECK(b.code == kExitData);
}

TEST_CASE("backend failures exit with the backend code") {
  TempDir dir("cli_backend");
  const std::string d = dir.path().string();
  REQUIRE(cli({"synth-data", "--out", d, "--patients", "12", "--n-labels", "1"}).code == kExitOk);
  REQUIRE(cli({"build-dataset", "--chartevents", d + "/chartevents.csv", "--images", d + "/images.csv", "--labels",
               d + "/labels.csv", "--out", d + "/vqa.jsonl"})
              .code == kExitOk);
  // Nothing listens on port 9 on loopback.
  const Result r = cli({"run", "--dataset", d + "/vqa.jsonl", "--backend", "http://127.0.0.1:9", "--crop-dir",
                        d + "/crops", "--concurrency", "1", "--out", d + "/failed.json"});
  CHECK(r.code == kExitBackend);
}

TEST_CASE("README walkthrough") {
  TempDir dir("cli_readme");
  const std::string d = dir.path().string();

  const Result synth = cli({"synth-data", "--out", d + "/data", "--seed", "7", "--patients", "60", "--n-labels", "3"});
  REQUIRE(synth.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "data/planted.json"));
  CHECK(std::filesystem::exists(dir / "data/images/p0001.pgm"));

  const Result build = cli({"build-dataset", "--chartevents", d + "/data/chartevents.csv", "--images",
                            d + "/data/images.csv", "--labels", d + "/data/labels.csv", "--out",
                            d + "/data/vqa.jsonl", "--pool-size", "12"});
  REQUIRE(build.code == kExitOk);
  CHECK(build.out.find("records=180 labels=3") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "data/vqa.jsonl.manifest.json"));

  const std::vector<std::string> common = {"--dataset", d + "/data/vqa.jsonl", "--crop-dir", d + "/crops"};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> tail = {}) {
    head.insert(head.end(), common.begin(), common.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };

  const Result run = cli(with({"run"}, {"--out", d + "/run.json"}));
  REQUIRE(run.code == kExitOk);
  CHECK(run.out.find("DPS Setting") != std::string::npos);
  CHECK(run.out.find("errors=0") != std::string::npos);
  const Result rerun = cli(with({"run"}, {"--out", d + "/run2.json"}));
  CHECK(slurp(dir / "run.json") == slurp(dir / "run2.json"));

  // Flags override the config file, which overrides the defaults.
  std::ofstream(dir / "cfg.json") << R"({"shots": 4, "dps_enabled": false})";
  REQUIRE(cli(with({"run"}, {"--config", d + "/cfg.json", "--shots", "5", "--out", d + "/run3.json"})).code ==
          kExitOk);
  const Report r3 = report_from_json(slurp(dir / "run3.json"));
  CHECK(r3.config.shots == 5);
  CHECK_FALSE(r3.config.dps_enabled);

  const Result grid = cli(with({"sweep", "--axis", "grid"}, {"--out", d + "/grid.json"}));
  REQUIRE(grid.code == kExitOk);
  CHECK(grid.out.rfind("DPS Setting | VG Setting | Precision | Recall | F1-score | Accuracy", 0) == 0);

  const Result shots = cli(with({"sweep", "--axis", "shots"}));
  REQUIRE(shots.code == kExitOk);
  CHECK(shots.out.find("12-shot") != std::string::npos);

  const Result th = cli(with({"sweep", "--axis", "threshold"},
                             {"--csv", d + "/threshold.csv", "--svg", d + "/threshold.svg"}));
  REQUIRE(th.code == kExitOk);
  CHECK(slurp(dir / "threshold.svg").find("DPS threshold") != std::string::npos);
  CHECK(cli(with({"sweep", "--axis", "grid"}, {"--svg", d + "/g.svg"})).code == kExitUsage);

  const Result rep = cli({"report", "--input", d + "/run.json"});
  REQUIRE(rep.code == kExitOk);
  CHECK(rep.out == run.out);
  const Result rep_grid = cli({"report", "--input", d + "/grid.json"});
  CHECK(rep_grid.out == grid.out);
  const Result chart = cli({"report", "--csv", d + "/threshold.csv", "--svg", d + "/chart.svg", "--title", "Sweep"});
  REQUIRE(chart.code == kExitOk);
  CHECK(slurp(dir / "chart.svg").find("Sweep") != std::string::npos);
}

TEST_CASE("documented run invocation") {
  TempDir dir("cli_doc");
  const std::string d = dir.path().string();
  REQUIRE(cli({"synth-data", "--out", d, "--patients", "20"}).code == kExitOk);
  REQUIRE(cli({"build-dataset", "--chartevents", d + "/chartevents.csv", "--images", d + "/images.csv", "--labels",
               d + "/labels.csv", "--out", d + "/d.jsonl"})
              .code == kExitOk);
  std::ofstream(dir / "cfg.json") << R"({"threshold": 0.5})";
  // Relative paths and the default report location, as written in the docs.
  const auto cwd = std::filesystem::current_path();
  std::filesystem::current_path(dir.path());
  const Result r = cli({"run", "--config", "cfg.json", "--dataset", "d.jsonl", "--backend", "mock", "--seed", "7"});
  std::filesystem::current_path(cwd);
  CHECK(r.code == kExitOk);
  REQUIRE(std::filesystem::exists(dir / "report.json"));
  const Report report = report_from_json(slurp(dir / "report.json"));
  CHECK(report.config.seed == 7);
  CHECK(report.config.threshold == 0.5);
}
