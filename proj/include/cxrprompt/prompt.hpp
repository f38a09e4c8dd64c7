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

// Interleaved few-shot prompt construction and answer parsing.

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cxrprompt/core.hpp"
#include "cxrprompt/dps.hpp"

namespace cxrprompt {

enum class TemplateKind { kImageText, kEhrText, kImageEhrText };

std::string_view to_string(TemplateKind kind);
TemplateKind parse_template(std::string_view s);
bool has_images(TemplateKind kind);

struct ImageSlot {
  std::string image_ref;
  friend bool operator==(const ImageSlot&, const ImageSlot&) = default;
};

struct TextSegment {
  std::string text;
  friend bool operator==(const TextSegment&, const TextSegment&) = default;
};

using PromptSegment = std::variant<ImageSlot, TextSegment>;

// Placeholder an image slot occupies when a prompt is rendered as text.
inline constexpr std::string_view kImageToken = "<image>";

struct PromptSequence {
  std::vector<PromptSegment> segments;
  std::size_t shot_count = 0;

  [[nodiscard]] std::size_t image_slots() const;
  [[nodiscard]] std::vector<std::string> texts() const;
  // Flat rendering with kImageToken in place of images.
  [[nodiscard]] std::string render() const;

  friend bool operator==(const PromptSequence&, const PromptSequence&) = default;
};

struct PromptOptions {
  std::size_t max_chars = 8000;
};

// Answer text a demonstration carries for its label.
std::string_view answer_text(int label);

std::string render_question(std::string_view label_name, std::span<const LabFeature> features,
                            TemplateKind kind);

// Shots go in the given order, so the last one is the one adjacent to the
// query. Each shot is [image?][question][answer]; the query block is
// [image?][question] with no answer. The query label is never read.
PromptSequence assemble_prompt(std::span<const Candidate> shots, const QuerySample& query,
                               const std::string& query_image, TemplateKind kind,
                               const PromptOptions& options = {});

PromptSequence assemble_prompt(const PromptOrder& shots, const QuerySample& query,
                               const std::string& query_image, TemplateKind kind,
                               const PromptOptions& options = {});

// Looks for a standalone "yes" or "no" in the first sentence, ignoring case.
// Both or neither gives kUnparseable.
Prediction parse_answer(std::string_view generation);

}  // namespace cxrprompt
