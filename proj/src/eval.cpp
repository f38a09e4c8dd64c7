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

#include "cxrprompt/eval.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "cxrprompt/grounding.hpp"
#include "cxrprompt/log.hpp"
#include "cxrprompt/rng.hpp"
#include "cxrprompt/similarity.hpp"

namespace cxrprompt {

using json = nlohmann::json;

std::string_view to_string(UnparseablePolicy p) {
  return p == UnparseablePolicy::kExclude ? "exclude" : "count_incorrect";
}

UnparseablePolicy parse_unparseable_policy(std::string_view s) {
  if (s == "count_incorrect") return UnparseablePolicy::kCountIncorrect;
  if (s == "exclude") return UnparseablePolicy::kExclude;
  throw Error(ErrorCode::kInvalidArgument, "unknown unparseable policy '" + std::string(s) + "'");
}

void ExperimentConfig::validate() const {
  validate_threshold(threshold);
  if (shots < 1) throw Error(ErrorCode::kInvalidArgument, "shots must be >= 1");
  if (min_keep < 1 || min_keep > shots) {
    throw Error(ErrorCode::kInvalidArgument, "min_keep must be in [1, shots]");
  }
  if (padding_px < 0) throw Error(ErrorCode::kInvalidArgument, "padding_px must be >= 0");
  if (max_new_tokens < 1) throw Error(ErrorCode::kInvalidArgument, "max_new_tokens must be >= 1");
  if (max_prompt_chars < 1) throw Error(ErrorCode::kInvalidArgument, "max_prompt_chars must be >= 1");
  if (concurrency < 1) throw Error(ErrorCode::kInvalidArgument, "concurrency must be >= 1");
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["dps_enabled"] = c.dps_enabled;
  j["vg_enabled"] = c.vg_enabled;
  j["modality"] = to_string(c.modality);
  j["threshold"] = c.threshold;
  j["shots"] = c.shots;
  j["template"] = to_string(c.template_kind);
  j["seed"] = c.seed;
  j["unparseable_policy"] = to_string(c.unparseable_policy);
  j["padding_px"] = c.padding_px;
  j["max_prompt_chars"] = c.max_prompt_chars;
  j["max_new_tokens"] = c.max_new_tokens;
  j["min_keep"] = c.min_keep;
  j["concurrency"] = c.concurrency;
  j["crop_dir"] = c.crop_dir.generic_string();
  return j.dump(2);
}

ExperimentConfig config_from_json(std::string_view text, ExperimentConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchemaError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "dps_enabled") c.dps_enabled = v.get<bool>();
      else if (key == "vg_enabled") c.vg_enabled = v.get<bool>();
      else if (key == "modality") c.modality = parse_modality(v.get<std::string>());
      else if (key == "threshold") c.threshold = v.get<double>();
      else if (key == "shots") c.shots = v.get<std::size_t>();
      else if (key == "template") c.template_kind = parse_template(v.get<std::string>());
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "unparseable_policy") c.unparseable_policy = parse_unparseable_policy(v.get<std::string>());
      else if (key == "padding_px") c.padding_px = v.get<int>();
      else if (key == "max_prompt_chars") c.max_prompt_chars = v.get<std::size_t>();
      else if (key == "max_new_tokens") c.max_new_tokens = v.get<int>();
      else if (key == "min_keep") c.min_keep = v.get<std::size_t>();
      else if (key == "concurrency") c.concurrency = v.get<std::size_t>();
      else if (key == "crop_dir") c.crop_dir = v.get<std::string>();
      else throw Error(ErrorCode::kSchemaError, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("config field has the wrong type: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSchemaError) throw;
    throw Error(ErrorCode::kSchemaError, e.what());
  }
  c.validate();
  return c;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  unparseable += o.unparseable;
  excluded += o.excluded;
  return *this;
}

void tally(ConfusionMatrix& cm, Prediction::Outcome prediction, int gold, UnparseablePolicy policy) {
  using O = Prediction::Outcome;
  if (gold != 0 && gold != 1) throw Error(ErrorCode::kInvalidArgument, "gold label must be 0 or 1");
  if (prediction == O::kUnparseable) {
    ++cm.unparseable;
    if (policy == UnparseablePolicy::kExclude) {
      ++cm.excluded;
      return;
    }
    prediction = gold == 1 ? O::kNegative : O::kPositive;
  }
  if (prediction == O::kPositive) {
    ++(gold == 1 ? cm.tp : cm.fp);
  } else {
    ++(gold == 1 ? cm.fn : cm.tn);
  }
}

ConfusionMatrix confusion(std::span<const Prediction::Outcome> predictions, std::span<const int> golds,
                          UnparseablePolicy policy) {
  if (predictions.size() != golds.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                                std::to_string(golds.size()) + " golds");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) tally(cm, predictions[i], golds[i], policy);
  return cm;
}

namespace {

struct BinaryScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

BinaryScores binary_scores(std::size_t tp, std::size_t fp, std::size_t fn) {
  BinaryScores s;
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  if (tp + fp == 0) s.precision_undefined = true;
  else s.precision = d(tp) / d(tp + fp);
  if (tp + fn == 0) s.recall_undefined = true;
  else s.recall = d(tp) / d(tp + fn);
  if (s.precision + s.recall == 0.0) s.f1_undefined = true;
  else s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

}  // namespace

Metrics metrics(const ConfusionMatrix& cm) {
  if (cm.scored() == 0) throw Error(ErrorCode::kEmptyConfusion, "no scored predictions");
  const BinaryScores pos = binary_scores(cm.tp, cm.fp, cm.fn);
  const BinaryScores neg = binary_scores(cm.tn, cm.fn, cm.fp);
  const double n = static_cast<double>(cm.scored());

  Metrics m;
  m.precision = pos.precision;
  m.recall = pos.recall;
  m.f1 = pos.f1;
  m.precision_undefined = pos.precision_undefined;
  m.recall_undefined = pos.recall_undefined;
  m.f1_undefined = pos.f1_undefined;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / n;
  m.weighted_f1 = (pos.f1 * static_cast<double>(cm.tp + cm.fn) + neg.f1 * static_cast<double>(cm.tn + cm.fp)) / n;
  return m;
}

double Report::mean_retained() const {
  std::size_t n = 0;
  std::size_t sum = 0;
  for (const auto& [kept, count] : retained_histogram) {
    n += count;
    sum += kept * count;
  }
  return n == 0 ? 0.0 : static_cast<double>(sum) / static_cast<double>(n);
}

std::vector<std::size_t> select_pool_subset(std::uint64_t seed, std::string_view query_id,
                                            std::span<const int> pool_labels, std::size_t shots) {
  if (shots < 1) throw Error(ErrorCode::kInvalidArgument, "shots must be >= 1");
  if (shots > pool_labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "shots (" + std::to_string(shots) + ") exceed the candidate pool (" +
                                                 std::to_string(pool_labels.size()) + ")");
  }
  std::vector<std::size_t> order(pool_labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SeededRng rng(mix_seed(seed, "subset/" + std::string(query_id)));
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(shots));
  if (shots >= 2) {
    for (int cls : {0, 1}) {
      const auto has = [&](std::size_t i) { return pool_labels[i] == cls; };
      if (std::any_of(chosen.begin(), chosen.end(), has)) continue;
      const auto spare = std::find_if(order.begin() + static_cast<std::ptrdiff_t>(shots), order.end(), has);
      if (spare == order.end()) continue;
      // Give up a slot held by the majority class.
      auto victim = std::find_if(chosen.rbegin(), chosen.rend(), [&](std::size_t i) { return !has(i); });
      *victim = *spare;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

namespace {

constexpr std::string_view kNoLabsText = "no laboratory test results";

std::string text_input(const Record& r) {
  if (r.features().empty()) return std::string(kNoLabsText);
  return serialize_features(r.features());
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; the first exception
// stops further work and is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= n || failed) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  const std::size_t threads = std::min(workers, n);
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
}

struct Prepared {
  Record record;  // image_ref points at the grounded image
  EmbeddedSample embedded;
  bool grounding_miss = false;
};

Prepared prepare(const Record& record, const ExperimentConfig& config, const BackendSet& backends) {
  GroundedImage grounded{record.image_ref(), std::nullopt, 0, record.image_ref(), false};
  // The text-only template shows no images, so there is nothing to ground.
  if (has_images(config.template_kind)) {
    grounded = ground(record.image_ref(), GroundingQuery{record.label_name()}, backends.detector.get(),
                      config.vg_enabled, GroundingOptions{config.padding_px, config.crop_dir});
  }
  Embedding image = backends.image_embedder->embed_image(grounded.image_ref);
  Embedding text = backends.text_embedder->embed_text(text_input(record));
  return Prepared{record.with_image(grounded.image_ref), EmbeddedSample{std::move(image), std::move(text)},
                  grounded.grounding_miss};
}

void require_backends(const BackendSet& b, const ExperimentConfig& config) {
  if (!b.text_embedder || !b.image_embedder || !b.generator) {
    throw Error(ErrorCode::kInvalidArgument, "backend set needs text/image embedders and a generator");
  }
  if (config.vg_enabled && has_images(config.template_kind) && !b.detector) {
    throw Error(ErrorCode::kInvalidArgument, "visual grounding needs a detector backend");
  }
}

}  // namespace

Report run_experiment(const ExperimentConfig& config, const VqaDataset& dataset, const BackendSet& backends,
                      const QueryCallback& on_query) {
  config.validate();
  require_backends(backends, config);

  Report report;
  report.config = config;
  std::mutex callback_mutex;

  for (const auto& [label, summary] : dataset.labels) {
    const auto pool_records = dataset.for_label(label, Split::kCandidate);
    const auto query_records = dataset.for_label(label, Split::kQuery);
    if (query_records.empty()) continue;

    // Candidates are grounded and embedded once per label.
    std::vector<std::optional<Prepared>> prepared(pool_records.size());
    parallel_for(pool_records.size(), config.concurrency, [&](std::size_t i) {
      prepared[i] = prepare(pool_records[i]->record, config, backends);
    });
    std::vector<PoolEntry> pool;
    std::vector<int> pool_labels;
    for (auto& p : prepared) {
      if (p->grounding_miss) ++report.grounding_misses;
      pool_labels.push_back(p->record.label());
      pool.push_back(PoolEntry{Candidate{p->record}, p->embedded});
    }

    std::vector<QueryResult> results(query_records.size());
    parallel_for(query_records.size(), config.concurrency, [&](std::size_t qi) {
      const Record& record = query_records[qi]->record;
      QueryResult& r = results[qi];
      r.query_id = record.id();
      r.label_name = record.label_name();
      r.gold = record.label();
      r.shots_offered = config.shots;

      const auto subset = select_pool_subset(config.seed, record.id(), pool_labels, config.shots);
      std::vector<PoolEntry> offered;
      for (std::size_t i : subset) offered.push_back(pool[i]);

      try {
        const Prepared q = prepare(record, config, backends);
        r.grounding_miss = q.grounding_miss;

        PromptOrder order;
        auto scored = score_pool(offered, q.embedded, config.modality);
        if (config.dps_enabled) {
          order = select_scored(scored, config.threshold, config.min_keep);
        } else {
          SeededRng rng(mix_seed(config.seed, "order/" + record.id()));
          rng.shuffle(std::span<ScoredCandidate>(scored));
          order.shots = std::move(scored);
        }
        r.shots_kept = order.size();
        r.adjacent_shot_id = order.shots.back().candidate.record.id();
        r.adjacent_score = order.shots.back().score.value();

        const PromptSequence prompt =
            assemble_prompt(order, QuerySample{q.record}, q.record.image_ref(), config.template_kind,
                            PromptOptions{config.max_prompt_chars});
        GenerateRequest request{prompt, config.max_new_tokens,
                                static_cast<std::int64_t>(mix_seed(config.seed, record.id()) >> 1)};
        r.prediction = parse_answer(backends.generator->generate(request));
        if (on_query) {
          std::lock_guard lock(callback_mutex);
          on_query(QueryTrace{r, order, prompt});
        }
      } catch (const Error& e) {
        if (!is_backend_error(e.code()) && e.code() != ErrorCode::kPromptTooLong) throw;
        logger()->warn("event=query_failed query={} code={} error=\"{}\"", record.id(), to_string(e.code()),
                       e.what());
        r.prediction = Prediction{Prediction::Outcome::kUnparseable, ""};
        r.error = e.what();
      }
    });

    LabelReport& lr = report.per_label[label];
    for (auto& r : results) {
      tally(lr.confusion, r.prediction.outcome, r.gold, config.unparseable_policy);
      if (r.grounding_miss) ++report.grounding_misses;
      if (r.error) report.errors.push_back(QueryError{r.query_id, *r.error});
      if (!r.error) ++report.retained_histogram[r.shots_kept];
      report.queries.push_back(std::move(r));
    }
    if (lr.confusion.scored() > 0) lr.metrics = metrics(lr.confusion);
    report.confusion += lr.confusion;
  }
  if (report.queries.empty()) throw Error(ErrorCode::kInsufficientData, "dataset has no query records");
  if (report.confusion.scored() > 0) report.metrics = metrics(report.confusion);
  logger()->info("event=run_done queries={} errors={} dps={} vg={} shots={} threshold={}", report.queries.size(),
                 report.errors.size(), config.dps_enabled, config.vg_enabled, config.shots, config.threshold);
  return report;
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kShots: return "shots";
    case SweepAxis::kThreshold: return "threshold";
    case SweepAxis::kModality: return "modality";
    case SweepAxis::kGrid: return "grid";
  }
  return "?";
}

SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "shots") return SweepAxis::kShots;
  if (s == "threshold") return SweepAxis::kThreshold;
  if (s == "modality") return SweepAxis::kModality;
  if (s == "grid") return SweepAxis::kGrid;
  throw Error(ErrorCode::kInvalidArgument, "unknown sweep axis '" + std::string(s) + "'");
}

std::vector<double> default_sweep_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kShots: return {4, 6, 8, 10, 12};
    case SweepAxis::kThreshold: return {-1.0, -0.5, 0.0, 0.5, 0.7, 0.9, 1.0};
    default: return {};
  }
}

std::vector<std::pair<std::string, ExperimentConfig>> sweep_configs(SweepAxis axis, std::span<const double> values,
                                                                    const ExperimentConfig& base) {
  std::vector<std::pair<std::string, ExperimentConfig>> out;
  switch (axis) {
    case SweepAxis::kShots:
      for (double v : values) {
        if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
          throw Error(ErrorCode::kInvalidArgument, "shot counts must be positive integers");
        }
        ExperimentConfig c = base;
        c.shots = static_cast<std::size_t>(v);
        out.emplace_back(std::to_string(c.shots) + "-shot", c);
      }
      break;
    case SweepAxis::kThreshold:
      if (!std::is_sorted(values.begin(), values.end())) {
        throw Error(ErrorCode::kInvalidArgument, "thresholds must be ascending");
      }
      for (double v : values) {
        ExperimentConfig c = base;
        c.dps_enabled = true;
        c.threshold = v;
        out.emplace_back(format_value(v), c);
      }
      break;
    case SweepAxis::kModality:
      for (auto [m, name] : {std::pair{Modality::kText, "Text"}, std::pair{Modality::kImage, "Image"},
                             std::pair{Modality::kMultimodal, "Multimodal"}}) {
        ExperimentConfig c = base;
        c.dps_enabled = true;
        c.modality = m;
        out.emplace_back(name, c);
      }
      break;
    case SweepAxis::kGrid:
      for (bool dps : {false, true}) {
        for (bool vg : {false, true}) {
          ExperimentConfig c = base;
          c.dps_enabled = dps;
          c.vg_enabled = vg;
          out.emplace_back(std::string("dps=") + (dps ? "on" : "off") + " vg=" + (vg ? "on" : "off"), c);
        }
      }
      break;
  }
  for (const auto& [name, c] : out) c.validate();
  return out;
}

std::vector<SweepPoint> sweep(SweepAxis axis, std::span<const double> values, const ExperimentConfig& base,
                              const VqaDataset& dataset, const BackendSet& backends) {
  std::vector<SweepPoint> points;
  for (auto& [setting, config] : sweep_configs(axis, values, base)) {
    points.push_back(SweepPoint{setting, run_experiment(config, dataset, backends)});
  }
  return points;
}

}  // namespace cxrprompt
