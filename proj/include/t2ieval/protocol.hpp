// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "t2ieval/jsonl.hpp"
#include "t2ieval/rational.hpp"

namespace t2ieval {

struct EntityAnnotation;

enum class TaskKind { Faithfulness, Alignment };

std::string_view to_string(TaskKind task);
TaskKind parse_task(std::string_view text);

// Prompt attributes that alignment templates can reference. Each has exactly
// one placeholder token in the template alphabet.
enum class Attribute { Object, Count, Color, Style, Spatial, Action };

std::string_view to_string(Attribute attr);
Attribute parse_attribute(std::string_view text);
std::string_view placeholder_token(Attribute attr);

}  // namespace t2ieval

namespace t2ieval::protocol {

struct OptionSpec {
  int label = 0;
  std::string text;
  Rational score;

  friend bool operator==(const OptionSpec&, const OptionSpec&) = default;
};

struct QuestionSpec {
  std::string id;
  TaskKind task = TaskKind::Faithfulness;
  std::string template_text;
  std::vector<OptionSpec> options;
  // Selecting this label removes the question from aggregation.
  std::optional<int> not_applicable_label;
  // Alignment questions are dispatched only when this attribute is annotated.
  std::optional<Attribute> applicability;

  const OptionSpec* find_option(int label) const;
  bool has_label(int label) const { return find_option(label) != nullptr; }
  std::vector<Attribute> placeholders() const;

  friend bool operator==(const QuestionSpec&, const QuestionSpec&) = default;
};

struct RenderedInstruction {
  std::string sample_id;
  std::string question_id;
  std::string final_text;
  std::string image_ref;
  std::vector<OptionSpec> option_index;
};

// A complete, validated protocol: the faithfulness and alignment banks.
class QuestionBank {
 public:
  QuestionBank() = default;
  QuestionBank(std::vector<QuestionSpec> faithfulness, std::vector<QuestionSpec> alignment);

  const std::vector<QuestionSpec>& faithfulness() const { return faithfulness_; }
  const std::vector<QuestionSpec>& alignment() const { return alignment_; }
  const std::vector<QuestionSpec>& questions(TaskKind task) const;
  std::vector<const QuestionSpec*> all() const;

  const QuestionSpec* find(std::string_view id) const;
  const QuestionSpec& at(std::string_view id) const;

  friend bool operator==(const QuestionBank&, const QuestionBank&) = default;

 private:
  std::vector<QuestionSpec> faithfulness_;
  std::vector<QuestionSpec> alignment_;
};

QuestionBank builtin_banks();

// Throws Error(Schema) describing the first violated invariant.
void validate(const QuestionSpec& question);
void validate(const QuestionBank& bank);

bool is_applicable(const QuestionSpec& question, const EntityAnnotation& annotation);

// Substitutes placeholders and appends the option list the same way the
// instruction templates print it. Throws Error(MissingAttribute) when a
// placeholder's attribute is absent from the annotation.
RenderedInstruction render(const QuestionSpec& question, const EntityAnnotation& annotation,
                           std::string_view image_ref, std::string_view sample_id = {});

// Template text with placeholders filled, without the option list.
std::string fill_template(const QuestionSpec& question, const EntityAnnotation& annotation);
std::string attribute_text(Attribute attr, const EntityAnnotation& annotation);

// Versioned protocol file.
inline constexpr int kProtocolVersion = 1;
Json to_json(const QuestionBank& bank);
QuestionBank bank_from_json(const Json& doc);
QuestionBank load_protocol(const std::filesystem::path& path);
void save_protocol(const QuestionBank& bank, const std::filesystem::path& path);
std::string protocol_text(const QuestionBank& bank);

}  // namespace t2ieval::protocol
