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

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "cxrprompt/eval.hpp"
#include "cxrprompt/report.hpp"
#include "helpers.hpp"

using namespace cxrprompt;
using cxrprompt::testing::synth_dataset;
using cxrprompt::testing::TempDir;
using Outcome = Prediction::Outcome;

namespace {

constexpr double kTol = 1e-12;

ExperimentConfig test_config(const TempDir& dir) {
  ExperimentConfig c;
  c.seed = 11;
  c.crop_dir = dir / "crops";
  return c;
}

}  // namespace

TEST_CASE("confusion matrix from predictions") {
  const std::vector<Outcome> pred = {Outcome::kPositive, Outcome::kPositive, Outcome::kPositive, Outcome::kPositive,
                                     Outcome::kNegative, Outcome::kNegative, Outcome::kNegative, Outcome::kNegative,
                                     Outcome::kNegative, Outcome::kNegative};
  const std::vector<int> gold = {1, 1, 1, 0, 1, 1, 0, 0, 0, 0};
  const ConfusionMatrix cm = confusion(pred, gold);
  CHECK(cm.tp == 3);
  CHECK(cm.fp == 1);
  CHECK(cm.fn == 2);
  CHECK(cm.tn == 4);

  const Metrics m = metrics(cm);
  CHECK(std::abs(m.precision - 0.75) <= kTol);
  CHECK(std::abs(m.recall - 0.6) <= kTol);
  CHECK(std::abs(m.f1 - 2.0 / 3.0) <= kTol);
  CHECK(std::abs(m.accuracy - 0.7) <= kTol);
  // Negative class: P = 4/6, R = 4/5, F1 = 8/11; supports 5 and 5.
  CHECK(std::abs(m.weighted_f1 - (2.0 / 3.0 + 8.0 / 11.0) / 2.0) <= kTol);

  CHECK_THROWS_AS(confusion(pred, std::vector<int>{1, 0}), Error);
}

TEST_CASE("unparseable answers under both policies") {
  const std::vector<Outcome> pred = {Outcome::kUnparseable, Outcome::kUnparseable, Outcome::kPositive};
  const std::vector<int> gold = {1, 0, 1};
  const ConfusionMatrix counted = confusion(pred, gold, UnparseablePolicy::kCountIncorrect);
  CHECK(counted == ConfusionMatrix{1, 1, 1, 0, 2, 0});
  const ConfusionMatrix excluded = confusion(pred, gold, UnparseablePolicy::kExclude);
  CHECK(excluded == ConfusionMatrix{1, 0, 0, 0, 2, 2});
  CHECK(excluded.total() == 3);
  CHECK(metrics(excluded).accuracy == 1.0);
  CHECK_THROWS_AS(metrics(confusion(std::vector<Outcome>{Outcome::kUnparseable}, std::vector<int>{1},
                                    UnparseablePolicy::kExclude)),
                  Error);
}

TEST_CASE("undefined ratios are zero and flagged") {
  const Metrics m = metrics(ConfusionMatrix{0, 0, 0, 5, 0, 0});
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.precision_undefined);
  CHECK(m.recall_undefined);
  CHECK(m.f1_undefined);
  CHECK(m.accuracy == 1.0);
}

TEST_CASE("metrics agree with their definitions on random matrices") {
  SeededRng rng(21);
  for (int i = 0; i < 1000; ++i) {
    ConfusionMatrix cm;
    cm.tp = rng.index(50);
    cm.fp = rng.index(50);
    cm.fn = rng.index(50);
    cm.tn = rng.index(50) + 1;
    const Metrics m = metrics(cm);
    const double tp = cm.tp, fp = cm.fp, fn = cm.fn, tn = cm.tn;
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    CHECK(std::abs(m.precision - p) <= kTol);
    CHECK(std::abs(m.recall - r) <= kTol);
    CHECK(std::abs(m.f1 - f) <= kTol);
    CHECK(std::abs(m.accuracy - (tp + tn) / (tp + fp + fn + tn)) <= kTol);
    CHECK(m.precision >= 0.0);
    CHECK(m.f1 <= 1.0);
    CHECK(m.f1 <= std::max(m.precision, m.recall) + kTol);
    CHECK(m.f1 >= std::min(m.precision, m.recall) - kTol);
  }
}

TEST_CASE("pool subsets") {
  SeededRng rng(4);
  for (int i = 0; i < 300; ++i) {
    std::vector<int> labels(2 + rng.index(14));
    for (auto& l : labels) l = static_cast<int>(rng.index(2));
    const std::size_t shots = 1 + rng.index(labels.size());
    const std::string id = "q" + std::to_string(i);
    const auto subset = select_pool_subset(9, id, labels, shots);
    CHECK(subset.size() == shots);
    CHECK(std::is_sorted(subset.begin(), subset.end()));
    CHECK(std::set<std::size_t>(subset.begin(), subset.end()).size() == shots);
    CHECK(subset.back() < labels.size());
    CHECK(subset == select_pool_subset(9, id, labels, shots));
    const bool both_in_pool = std::count(labels.begin(), labels.end(), 1) > 0 &&
                              std::count(labels.begin(), labels.end(), 0) > 0;
    if (both_in_pool && shots >= 2) {
      std::set<int> seen;
      for (std::size_t s : subset) seen.insert(labels[s]);
      CHECK(seen.size() == 2);
    }
  }
}

TEST_CASE("config JSON round trip and strictness") {
  ExperimentConfig c;
  c.dps_enabled = false;
  c.modality = Modality::kImage;
  c.threshold = -0.5;
  c.shots = 10;
  c.template_kind = TemplateKind::kEhrText;
  c.seed = 123456789012345ULL;
  c.unparseable_policy = UnparseablePolicy::kExclude;
  c.padding_px = 4;
  c.crop_dir = "out/crops";
  CHECK(config_from_json(config_to_json(c)) == c);
  CHECK(config_from_json(R"({"shots": 8})").shots == 8);
  CHECK_THROWS_AS(config_from_json(R"({"shot": 8})"), Error);
  CHECK_THROWS_AS(config_from_json(R"({"threshold": 1.5})"), Error);
  CHECK_THROWS_AS(config_from_json(R"({"shots": 2, "min_keep": 3})"), Error);
}

TEST_CASE("sweep configurations") {
  const ExperimentConfig base;
  const auto grid = sweep_configs(SweepAxis::kGrid, {}, base);
  REQUIRE(grid.size() == 4);
  CHECK(grid[0].second.dps_enabled == false);
  CHECK(grid[0].second.vg_enabled == false);
  CHECK(grid[3].second.dps_enabled);
  CHECK(grid[3].second.vg_enabled);
  const auto shots_values = default_sweep_values(SweepAxis::kShots);
  const auto shots = sweep_configs(SweepAxis::kShots, shots_values, base);
  REQUIRE(shots.size() == 5);
  CHECK(shots[0].first == "4-shot");
  CHECK(shots[4].second.shots == 12);
  const auto ths = default_sweep_values(SweepAxis::kThreshold);
  const auto th = sweep_configs(SweepAxis::kThreshold, ths, base);
  REQUIRE(th.size() == 7);
  CHECK(th[0].second.threshold == -1.0);
  CHECK(sweep_configs(SweepAxis::kModality, {}, base).size() == 3);
  const std::vector<double> bad = {1.5};
  CHECK_THROWS_AS(sweep_configs(SweepAxis::kShots, bad, base), Error);
  CHECK(parse_sweep_axis("grid") == SweepAxis::kGrid);
  CHECK_THROWS_AS(parse_sweep_axis("lr"), Error);
}

TEST_CASE("mock runs") {
  TempDir dir("eval");
  const VqaDataset ds = synth_dataset(dir.path(), SynthConfig{}, 12);
  const BackendSet backends = make_mock_backends(MockConfig{3, 64});
  ExperimentConfig config = test_config(dir);

  SUBCASE("deterministic across concurrency") {
    const Report a = run_experiment(config, ds, backends);
    config.concurrency = 1;
    Report b = run_experiment(config, ds, backends);
    b.config.concurrency = a.config.concurrency;
    CHECK(report_to_json(a) == report_to_json(b));
    CHECK(report_from_json(report_to_json(a)).queries.size() == a.queries.size());
    CHECK(report_to_json(report_from_json(report_to_json(a))) == report_to_json(a));
  }

  SUBCASE("prediction follows the shot next to the query") {
    // The mock generator repeats the answer right before the query, so its
    // accuracy is exactly the fraction of queries whose argmax shot shares
    // the gold label.
    for (bool dps : {true, false}) {
      config.dps_enabled = dps;
      std::size_t agree = 0;
      std::size_t traced = 0;
      const Report r = run_experiment(config, ds, backends, [&](const QueryTrace& t) {
        ++traced;
        const auto& adjacent = t.order.shots.back();
        if (adjacent.candidate.record.label() == t.result.gold) ++agree;
        const auto texts = t.prompt.texts();
        CHECK(texts[texts.size() - 2] == (adjacent.candidate.record.label() == 1 ? "yes" : "no"));
        if (dps) {
          for (const auto& s : t.order.shots) CHECK(s.score <= adjacent.score);
        } else {
          CHECK(t.order.size() == config.shots);
        }
      });
      CHECK(r.errors.empty());
      CHECK(traced == r.queries.size());
      REQUIRE(r.metrics);
      CHECK(std::abs(r.metrics->accuracy - static_cast<double>(agree) / static_cast<double>(traced)) <= kTol);
      const ConfusionMatrix from_labels = [&] {
        ConfusionMatrix m;
        for (const auto& [_, lr] : r.per_label) m += lr.confusion;
        return m;
      }();
      CHECK(from_labels == r.confusion);
      CHECK(std::abs(metrics(r.confusion).f1 - r.metrics->f1) <= kTol);
    }
  }

  SUBCASE("retention shrinks as the threshold rises") {
    const auto values = default_sweep_values(SweepAxis::kThreshold);
    const auto points = sweep(SweepAxis::kThreshold, values, config, ds, backends);
    REQUIRE(points.size() == values.size());
    CHECK(points.front().report.mean_retained() == static_cast<double>(config.shots));
    for (std::size_t i = 1; i < points.size(); ++i) {
      CHECK(points[i].report.mean_retained() <= points[i - 1].report.mean_retained());
    }
    for (const auto& p : points) {
      for (const auto& q : p.report.queries) CHECK(q.shots_kept >= 1);
    }
  }

  SUBCASE("text-only template skips grounding and images") {
    config.template_kind = TemplateKind::kEhrText;
    config.modality = Modality::kText;
    run_experiment(config, ds, backends, [&](const QueryTrace& t) { CHECK(t.prompt.image_slots() == 0); });
  }

  SUBCASE("grounding without a detector is rejected") {
    BackendSet no_detector = backends;
    no_detector.detector = nullptr;
    CHECK_THROWS_AS(run_experiment(config, ds, no_detector), Error);
  }
}
