// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/annotation_event.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>

#include "t2ieval/errors.hpp"

namespace t2ieval::annotation {

namespace {

constexpr std::array<std::pair<Action, std::string_view>, 6> kActions = {{
    {Action::Assign, "assign"},
    {Action::Save, "save"},
    {Action::Submit, "submit"},
    {Action::Report, "report"},
    {Action::ReviewAccept, "review_accept"},
    {Action::ReviewReject, "review_reject"},
}};

struct Submission {
  std::string annotator;
  std::uint64_t event_id = 0;
  std::map<std::string, int> answers;
};

}  // namespace

std::string_view to_string(Action action) {
  for (const auto& [a, name] : kActions)
    if (a == action) return name;
  return "save";
}

Action parse_action(std::string_view text) {
  for (const auto& [a, name] : kActions)
    if (name == text) return a;
  fail(ErrorKind::Schema, "unknown action '" + std::string(text) + "'");
}

Json to_json(const AnnotationEvent& e) {
  Json j = {{"event_id", e.event_id},
            {"annotator_id", e.annotator_id},
            {"sample_id", e.sample_id},
            {"action", to_string(e.action)},
            {"timestamp_ms", e.timestamp_ms}};
  if (e.question_id) j["question_id"] = *e.question_id;
  if (e.option_label) j["option_label"] = *e.option_label;
  if (e.note) j["note"] = *e.note;
  if (e.target_annotator) j["target_annotator"] = *e.target_annotator;
  if (e.round_index) j["round_index"] = *e.round_index;
  return j;
}

AnnotationEvent event_from_json(const Json& j, std::size_t line) {
  AnnotationEvent e;
  std::int64_t id = require_int(j, "event_id", line);
  if (id < 0) fail(ErrorKind::Schema, "line " + std::to_string(line) + ": negative event_id");
  e.event_id = static_cast<std::uint64_t>(id);
  e.annotator_id = require_string(j, "annotator_id", line);
  e.sample_id = require_string(j, "sample_id", line);
  e.action = parse_action(require_string(j, "action", line));
  if (auto it = j.find("timestamp_ms"); it != j.end() && it->is_number_integer()) e.timestamp_ms = it->get<std::int64_t>();
  if (j.contains("question_id") && !j["question_id"].is_null()) e.question_id = require_string(j, "question_id", line);
  if (j.contains("option_label") && !j["option_label"].is_null())
    e.option_label = static_cast<int>(require_int(j, "option_label", line));
  if (j.contains("note") && !j["note"].is_null()) e.note = require_string(j, "note", line);
  if (j.contains("target_annotator") && !j["target_annotator"].is_null())
    e.target_annotator = require_string(j, "target_annotator", line);
  if (j.contains("round_index") && !j["round_index"].is_null())
    e.round_index = static_cast<int>(require_int(j, "round_index", line));
  return e;
}

std::vector<AnnotationEvent> read_events(const std::filesystem::path& path) {
  std::vector<AnnotationEvent> out;
  for (const auto& rec : read_jsonl(path)) out.push_back(event_from_json(rec.value, rec.line));
  return out;
}

std::vector<FinalAnswer> final_answers(std::span<const AnnotationEvent> events) {
  std::vector<const AnnotationEvent*> ordered;
  ordered.reserve(events.size());
  for (const auto& e : events) ordered.push_back(&e);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const AnnotationEvent* a, const AnnotationEvent* b) { return a->event_id < b->event_id; });

  // drafts[sample][annotator][question] = label
  std::map<std::string, std::map<std::string, std::map<std::string, int>>> drafts;
  // Latest submission per (sample, annotator).
  std::map<std::string, std::map<std::string, Submission>> submitted;
  std::map<std::string, Submission> accepted;  // per sample, most recent accept
  std::set<std::string> reported;

  for (const AnnotationEvent* e : ordered) {
    switch (e->action) {
      case Action::Save:
        if (e->question_id && e->option_label) drafts[e->sample_id][e->annotator_id][*e->question_id] = *e->option_label;
        break;
      case Action::Submit:
        submitted[e->sample_id][e->annotator_id] = {e->annotator_id, e->event_id, drafts[e->sample_id][e->annotator_id]};
        break;
      case Action::Report:
        reported.insert(e->sample_id);
        break;
      case Action::ReviewAccept: {
        const std::string& target = e->target_annotator ? *e->target_annotator : e->annotator_id;
        auto& subs = submitted[e->sample_id];
        if (auto it = subs.find(target); it != subs.end()) accepted[e->sample_id] = it->second;
        break;
      }
      case Action::ReviewReject: {
        const std::string& target = e->target_annotator ? *e->target_annotator : e->annotator_id;
        submitted[e->sample_id].erase(target);
        if (auto it = accepted.find(e->sample_id); it != accepted.end() && it->second.annotator == target)
          accepted.erase(it);
        break;
      }
      case Action::Assign:
        break;
    }
  }

  std::vector<FinalAnswer> out;
  for (const auto& [sample, subs] : submitted) {
    if (reported.count(sample)) continue;
    const Submission* chosen = nullptr;
    if (auto it = accepted.find(sample); it != accepted.end()) {
      chosen = &it->second;
    } else {
      for (const auto& [annotator, s] : subs)
        if (!chosen || s.event_id > chosen->event_id) chosen = &s;
    }
    if (!chosen) continue;
    for (const auto& [question, label] : chosen->answers)
      out.push_back({sample, question, label, chosen->annotator, chosen->event_id});
  }
  // std::map iteration already yields (sample_id, question_id) order.
  return out;
}

}  // namespace t2ieval::annotation
