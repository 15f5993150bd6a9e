// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "t2ieval/annotation_event.hpp"
#include "t2ieval/corpus.hpp"
#include "t2ieval/protocol.hpp"
#include "t2ieval/stats.hpp"

namespace t2ieval::annosvc {

using annotation::Action;
using annotation::AnnotationEvent;

enum class Status { Pending, InProgress, Completed, Reported, ReAnnotate };
std::string_view to_string(Status s);

enum class Role { Annotator, Inspector };
std::string_view to_string(Role r);
Role parse_role(std::string_view text);

struct Account {
  std::string id;
  std::string token;
  Role role = Role::Annotator;
};

// {"accounts": [{"id": ..., "token": ..., "role": "annotator"|"inspector"}]}
std::vector<Account> load_accounts(const std::filesystem::path& path);
std::vector<Account> accounts_from_json(const Json& j);

enum class AssignMode { Production, Trial };
AssignMode parse_assign_mode(std::string_view text);

struct AssignPolicy {
  AssignMode mode = AssignMode::Production;
  std::uint64_t seed = 0;
  int round_index = 0;  // trial mode only
};

// Production: seeded shuffle dealt round-robin over the sorted annotators,
// so shares differ by at most one and never overlap. Trial: everyone gets
// every sample. Result is keyed by annotator; sample lists keep deal order.
std::map<std::string, std::vector<std::string>> plan_assignment(std::vector<std::string> samples,
                                                                 std::vector<std::string> annotators,
                                                                 const AssignPolicy& policy);

// Append-only JSONL log. Every append is fsync'd before it returns. A torn
// final line (crash mid-write) is cut off when the log is opened.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path);
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  const std::vector<AnnotationEvent>& events() const { return events_; }
  std::uint64_t next_id() const { return next_id_; }
  // Assigns event_id and persists. Returns the id.
  std::uint64_t append(AnnotationEvent& e);
  // Bytes dropped from a torn tail at open.
  std::size_t recovered_bytes() const { return recovered_bytes_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  std::vector<AnnotationEvent> events_;
  std::uint64_t next_id_ = 1;
  std::size_t recovered_bytes_ = 0;
};

struct AssignmentEntry {
  Status status = Status::Pending;
  std::map<std::string, int> drafts;     // current saved answers
  std::map<std::string, int> submitted;  // answers at the last Submit
  std::uint64_t last_event_id = 0;       // newest event touching this entry
  std::optional<int> round_index;
  bool rejected = false;  // a review rejected this submission
  bool accepted = false;
  std::optional<std::string> note;  // report note
};

// Annotator -> sample -> entry.
using AssignmentState = std::map<std::string, std::map<std::string, AssignmentEntry>>;

struct RecordResult {
  std::uint64_t event_id = 0;
  Status status = Status::Pending;
  bool stale = false;  // another write landed after the client's base_event_id
  std::optional<std::string> reassigned_to;  // reject routing
};

struct InspectionItem {
  std::string sample_id;
  std::string annotator_id;
  std::map<std::string, int> answers;
};

struct Worklist {
  std::vector<InspectionItem> items;
  std::size_t available = 0;
  std::optional<std::string> warning;
};

struct RoundKappa {
  int round_index = 0;
  std::vector<std::string> samples;
  std::vector<std::string> annotators;
  std::size_t items = 0;  // (sample, question) pairs in the agreement table
  stats::KappaSummary pairwise;
  std::optional<Rational> fleiss;
  std::optional<std::string> warning;
};

Json to_json(const RoundKappa& k);

struct ServiceOptions {
  std::filesystem::path log_path;
  std::optional<std::filesystem::path> snapshot_path;
  std::size_t snapshot_every = 100;  // events between snapshots, 0 disables
  std::function<std::int64_t()> clock;  // ms since epoch; defaults to system clock
};

// Questions an annotator answers for a sample: the bank of the prompt's task,
// restricted to applicable ones.
std::vector<const protocol::QuestionSpec*> sample_questions(const corpus::Corpus& corpus,
                                                            const protocol::QuestionBank& bank,
                                                            const SampleRecord& sample);

// Folds events into assignment state without validation. The service uses
// the same fold for live writes and for replay.
void apply_event(AssignmentState& state, const AnnotationEvent& e);
AssignmentState replay(std::span<const AnnotationEvent> events);
Json to_json(const AssignmentState& state);

class AnnotationService {
 public:
  AnnotationService(corpus::Corpus corpus, protocol::QuestionBank bank, std::vector<Account> accounts,
                    ServiceOptions options);

  const corpus::Corpus& corpus() const { return corpus_; }
  const protocol::QuestionBank& bank() const { return bank_; }

  // Throws Unauthorized for an unknown token.
  const Account& authenticate(std::string_view token) const;
  const Account* find_account(std::string_view id) const;

  // Writes Assign events. Samples default to every non-degraded sample,
  // annotators to every annotator-role account. Existing assignments of a
  // sample to the same annotator are left alone. Returns events written.
  std::size_t assign(const AssignPolicy& policy, std::vector<std::string> samples = {},
                     std::vector<std::string> annotators = {});
  bool has_assignments() const;

  // base_event_id: last event the client saw for this sample; a newer event
  // makes the write stale (still applied, flagged in the result).
  RecordResult save(const Account& who, std::string_view sample_id, std::string_view question_id, int option_label,
                    std::optional<std::uint64_t> base_event_id = std::nullopt);
  RecordResult submit(const Account& who, std::string_view sample_id,
                      std::optional<std::uint64_t> base_event_id = std::nullopt);
  RecordResult report(const Account& who, std::string_view sample_id, std::string_view note);
  RecordResult review_accept(const Account& who, std::string_view sample_id, std::string_view annotator_id);
  // Routes the sample to a different annotator when one exists, otherwise
  // back to the original one.
  RecordResult review_reject(const Account& who, std::string_view sample_id, std::string_view annotator_id,
                             std::optional<std::string> note = std::nullopt);

  // Uniform without replacement over completed, unreviewed submissions.
  Worklist inspect_sample(std::size_t count, std::uint64_t seed) const;
  Worklist inspect_fraction(double fraction, std::uint64_t seed) const;

  // Throws IncompleteRound unless every annotator of the round submitted
  // every applicable question of every round sample.
  RoundKappa round_kappa(int round_index);
  std::vector<int> rounds() const;

  AssignmentState state() const;
  std::map<std::string, AssignmentEntry> assignments(std::string_view annotator_id) const;
  std::optional<AssignmentEntry> entry(std::string_view annotator_id, std::string_view sample_id) const;
  std::vector<AnnotationEvent> events() const;
  std::vector<annotation::FinalAnswer> final_answers() const;
  std::string export_sft_jsonl() const;
  Json dashboard();
  void write_snapshot() const;

 private:
  RecordResult record(AnnotationEvent e, std::optional<std::uint64_t> base_event_id, std::string_view sample_id,
                      std::string_view annotator_id);
  const SampleRecord& require_sample(std::string_view sample_id) const;
  AssignmentEntry& require_entry(const Account& who, std::string_view sample_id);
  void require_inspector(const Account& who) const;
  void write_snapshot_locked() const;
  std::int64_t now() const;

  corpus::Corpus corpus_;
  protocol::QuestionBank bank_;
  std::vector<Account> accounts_;
  ServiceOptions options_;
  mutable std::mutex mu_;
  EventLog log_;
  AssignmentState state_;
  std::map<int, RoundKappa> round_cache_;
  std::size_t since_snapshot_ = 0;
};

}  // namespace t2ieval::annosvc
