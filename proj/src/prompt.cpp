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

#include "cxrprompt/prompt.hpp"

#include <cctype>

#include "cxrprompt/dataset.hpp"

namespace cxrprompt {

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kImageText: return "image_text";
    case TemplateKind::kEhrText: return "ehr_text";
    case TemplateKind::kImageEhrText: return "image_ehr_text";
  }
  return "image_ehr_text";
}

TemplateKind parse_template(std::string_view s) {
  if (s == "image_text") return TemplateKind::kImageText;
  if (s == "ehr_text") return TemplateKind::kEhrText;
  if (s == "image_ehr_text") return TemplateKind::kImageEhrText;
  throw Error(ErrorCode::kInvalidArgument, "unknown template '" + std::string(s) + "'");
}

bool has_images(TemplateKind kind) { return kind != TemplateKind::kEhrText; }

std::size_t PromptSequence::image_slots() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += std::holds_alternative<ImageSlot>(s) ? 1 : 0;
  return n;
}

std::vector<std::string> PromptSequence::texts() const {
  std::vector<std::string> out;
  for (const auto& s : segments) {
    if (const auto* t = std::get_if<TextSegment>(&s)) out.push_back(t->text);
  }
  return out;
}

std::string PromptSequence::render() const {
  std::string out;
  for (const auto& s : segments) {
    if (std::holds_alternative<ImageSlot>(s)) {
      out += kImageToken;
    } else {
      if (!out.empty() && out.back() != '>') out += ' ';
      out += std::get<TextSegment>(s).text;
    }
  }
  return out;
}

std::string_view answer_text(int label) { return label == 1 ? "yes" : "no"; }

std::string render_question(std::string_view label_name, std::span<const LabFeature> features,
                            TemplateKind kind) {
  if (!is_known_condition(label_name)) {
    throw Error(ErrorCode::kUnknownLabel, "'" + std::string(label_name) + "' is not a known condition");
  }
  std::string question = "Question: Is the patient likely to have ";
  question += label_name;
  if (kind != TemplateKind::kImageText) {
    const std::string serialized = serialize_features(features);
    if (!serialized.empty()) {
      question += ", given the following laboratory test results: ";
      question += serialized;
    }
  }
  question += '?';
  return question;
}

PromptSequence assemble_prompt(std::span<const Candidate> shots, const QuerySample& query,
                               const std::string& query_image, TemplateKind kind,
                               const PromptOptions& options) {
  if (shots.empty()) throw Error(ErrorCode::kZeroShots, "a prompt needs at least one shot");
  const bool images = has_images(kind);

  PromptSequence prompt;
  prompt.shot_count = shots.size();
  for (const auto& shot : shots) {
    const Record& r = shot.record;
    if (images) {
      if (r.image_ref().empty()) throw Error(ErrorCode::kMissingImage, "shot '" + r.id() + "' has no image");
      prompt.segments.emplace_back(ImageSlot{r.image_ref()});
    }
    prompt.segments.emplace_back(TextSegment{render_question(r.label_name(), r.features(), kind)});
    prompt.segments.emplace_back(TextSegment{std::string(answer_text(r.label()))});
  }
  if (images) {
    if (query_image.empty()) {
      throw Error(ErrorCode::kMissingImage, "query '" + query.record.id() + "' has no image");
    }
    prompt.segments.emplace_back(ImageSlot{query_image});
  }
  prompt.segments.emplace_back(TextSegment{
      render_question(query.record.label_name(), query.record.features(), kind)});

  std::size_t chars = 0;
  for (const auto& s : prompt.segments) {
    chars += std::holds_alternative<ImageSlot>(s) ? kImageToken.size()
                                                  : std::get<TextSegment>(s).text.size();
  }
  if (chars > options.max_chars) {
    throw Error(ErrorCode::kPromptTooLong, std::to_string(chars) + " characters exceeds the budget of " +
                                               std::to_string(options.max_chars));
  }
  return prompt;
}

PromptSequence assemble_prompt(const PromptOrder& shots, const QuerySample& query,
                               const std::string& query_image, TemplateKind kind,
                               const PromptOptions& options) {
  const auto candidates = shots.candidates();
  return assemble_prompt(std::span<const Candidate>(candidates), query, query_image, kind, options);
}

Prediction parse_answer(std::string_view generation) {
  std::string_view first = generation;
  // Skip leading blank lines so "\nYes" still parses.
  const auto start = first.find_first_not_of(" \t\r\n");
  first = start == std::string_view::npos ? std::string_view{} : first.substr(start);
  const auto end = first.find_first_of(".!?\n");
  if (end != std::string_view::npos) first = first.substr(0, end);

  bool yes = false;
  bool no = false;
  std::string word;
  auto flush = [&] {
    if (word == "yes") yes = true;
    if (word == "no") no = true;
    word.clear();
  };
  for (char c : first) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();

  Prediction p;
  p.raw_text = std::string(generation);
  if (yes != no) p.outcome = yes ? Prediction::Outcome::kPositive : Prediction::Outcome::kNegative;
  return p;
}

}  // namespace cxrprompt
