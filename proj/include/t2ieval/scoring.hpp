// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "t2ieval/corpus.hpp"
#include "t2ieval/parsing.hpp"
#include "t2ieval/protocol.hpp"
#include "t2ieval/rational.hpp"

namespace t2ieval::scoring {

enum class AggregationMode { Sum, Mean };

std::string_view to_string(AggregationMode mode);
AggregationMode parse_mode(std::string_view text);

struct ScoringConfig {
  AggregationMode faithfulness = AggregationMode::Mean;
  AggregationMode alignment = AggregationMode::Sum;

  AggregationMode mode(TaskKind task) const { return task == TaskKind::Faithfulness ? faithfulness : alignment; }
};

struct QuestionScore {
  std::string sample_id;
  std::string question_id;
  TaskKind task = TaskKind::Faithfulness;
  std::optional<int> option_label;
  std::optional<Rational> score;  // present iff applicable
  bool applicable = false;
};

QuestionScore score_question(const parsing::ParsedChoice& choice, const protocol::QuestionSpec& question);
// Entry for a question that was never dispatched because is_applicable failed.
QuestionScore inapplicable(std::string_view sample_id, const protocol::QuestionSpec& question);

// Sum or mean over applicable entries; nullopt when none is applicable.
// Throws Error(MixedTask) if entries disagree on task or sample.
std::optional<Rational> score_image(std::span<const QuestionScore> per_question, TaskKind task, AggregationMode mode);

struct ImageScore {
  std::string sample_id;
  std::string generator_id;
  std::optional<Rational> faithfulness;
  std::optional<Rational> alignment;
  std::vector<QuestionScore> per_question;
  AggregationMode faithfulness_mode = AggregationMode::Mean;
  AggregationMode alignment_mode = AggregationMode::Sum;
  // Applicable questions of a task that produced no parsed choice.
  std::size_t unparsed_faithfulness = 0;
  std::size_t unparsed_alignment = 0;

  std::size_t applicable_count(TaskKind task) const;
};

ImageScore score_sample(std::string_view sample_id, std::string_view generator_id,
                        std::vector<QuestionScore> per_question, const ScoringConfig& cfg,
                        std::size_t unparsed_faithfulness = 0, std::size_t unparsed_alignment = 0);

struct ScoreReport {
  std::string generator_id;
  std::size_t n_images = 0;
  std::optional<Rational> evalalign_f;
  std::optional<Rational> evalalign_a;
  std::size_t n_faithfulness = 0;  // images with a faithfulness value
  std::size_t n_alignment = 0;
  std::map<std::string, Rational> per_category;  // question_id -> mean over applicable images
  std::map<std::string, std::size_t> per_category_n;
};

// Skip-and-flag: unparsed questions are simply missing from their image.
ScoreReport aggregate_model(std::span<const ImageScore> images, std::string_view generator_id);
// Strict: a task value counts only for images where every applicable
// question of that task was parsed.
ScoreReport aggregate_model_strict(std::span<const ImageScore> images, std::string_view generator_id);

// Joins parsed choices with the corpus: one ImageScore per sample that has at
// least one choice, grouped by generator. Choices naming unknown samples or
// questions throw Error(DanglingReference).
std::map<std::string, std::vector<ImageScore>> score_choices(const corpus::Corpus& corpus,
                                                             const protocol::QuestionBank& bank,
                                                             std::span<const parsing::ParsedChoice> choices,
                                                             const ScoringConfig& cfg,
                                                             const std::vector<TaskKind>& tasks = {
                                                                 TaskKind::Faithfulness, TaskKind::Alignment});

Json to_json(const ScoreReport& r);
Json to_json(const ImageScore& s);
// One row per model: generator_id, evalalign_f, evalalign_a, then one column
// per question id in bank order. Absent values are empty cells.
std::string reports_csv(std::span<const ScoreReport> reports, const protocol::QuestionBank& bank);

}  // namespace t2ieval::scoring
