// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "t2ieval/jsonl.hpp"

namespace t2ieval::annotation {

// Assign is written by the service itself (task distribution and re-annotation
// routing) so the log alone reconstructs every assignment.
enum class Action { Assign, Save, Submit, Report, ReviewAccept, ReviewReject };

std::string_view to_string(Action action);
Action parse_action(std::string_view text);

struct AnnotationEvent {
  std::uint64_t event_id = 0;
  std::string annotator_id;
  std::string sample_id;
  std::optional<std::string> question_id;
  std::optional<int> option_label;
  Action action = Action::Save;
  std::int64_t timestamp_ms = 0;
  std::optional<std::string> note;
  // Review events: whose submission is judged.
  std::optional<std::string> target_annotator;
  // Assign events in trial mode carry the trial round.
  std::optional<int> round_index;

  friend bool operator==(const AnnotationEvent&, const AnnotationEvent&) = default;
};

Json to_json(const AnnotationEvent& e);
AnnotationEvent event_from_json(const Json& j, std::size_t line = 0);
std::vector<AnnotationEvent> read_events(const std::filesystem::path& path);

struct FinalAnswer {
  std::string sample_id;
  std::string question_id;
  int option_label = 0;
  std::string annotator_id;
  std::uint64_t submit_event_id = 0;
};

// Folds an event log (in event_id order) into the final human answers:
// answers are the Save state captured at Submit; rejected submissions drop
// out; an accepted submission beats unreviewed ones, and among accepted ones
// the most recently reviewed wins. Samples with any Report are excluded.
// Output is sorted by (sample_id, question_id).
std::vector<FinalAnswer> final_answers(std::span<const AnnotationEvent> events);

}  // namespace t2ieval::annotation
