// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/annosvc.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <tuple>

#include "t2ieval/errors.hpp"

namespace t2ieval::annosvc {

namespace {

constexpr std::string_view kReannotateNote = "re-annotate";

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorKind::Io, "write to " + path.string() + " failed: " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

void fsync_dir(const std::filesystem::path& dir) {
  int fd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Pending: return "pending";
    case Status::InProgress: return "in_progress";
    case Status::Completed: return "completed";
    case Status::Reported: return "reported";
    case Status::ReAnnotate: return "re_annotate";
  }
  return "pending";
}

std::string_view to_string(Role r) { return r == Role::Inspector ? "inspector" : "annotator"; }

Role parse_role(std::string_view text) {
  if (text == "annotator") return Role::Annotator;
  if (text == "inspector") return Role::Inspector;
  fail(ErrorKind::Config, "unknown role '" + std::string(text) + "'");
}

std::vector<Account> accounts_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("accounts") || !j["accounts"].is_array())
    fail(ErrorKind::Config, "accounts file needs an \"accounts\" array");
  std::vector<Account> out;
  std::set<std::string> ids, tokens;
  for (const auto& a : j["accounts"]) {
    Account acc;
    acc.id = a.value("id", "");
    acc.token = a.value("token", "");
    acc.role = parse_role(a.value("role", "annotator"));
    if (acc.id.empty() || acc.token.empty()) fail(ErrorKind::Config, "account needs id and token");
    if (!ids.insert(acc.id).second) fail(ErrorKind::Config, "duplicate account id '" + acc.id + "'");
    if (!tokens.insert(acc.token).second) fail(ErrorKind::Config, "duplicate token for account '" + acc.id + "'");
    out.push_back(std::move(acc));
  }
  return out;
}

std::vector<Account> load_accounts(const std::filesystem::path& path) {
  try {
    return accounts_from_json(Json::parse(read_text(path)));
  } catch (const Json::exception& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

AssignMode parse_assign_mode(std::string_view text) {
  if (text == "production") return AssignMode::Production;
  if (text == "trial") return AssignMode::Trial;
  fail(ErrorKind::Config, "unknown assignment mode '" + std::string(text) + "'");
}

std::map<std::string, std::vector<std::string>> plan_assignment(std::vector<std::string> samples,
                                                                 std::vector<std::string> annotators,
                                                                 const AssignPolicy& policy) {
  if (samples.empty()) fail(ErrorKind::NoData, "no samples to assign");
  if (annotators.empty()) fail(ErrorKind::NoData, "no annotators to assign to");
  std::sort(samples.begin(), samples.end());
  samples.erase(std::unique(samples.begin(), samples.end()), samples.end());
  std::sort(annotators.begin(), annotators.end());
  annotators.erase(std::unique(annotators.begin(), annotators.end()), annotators.end());

  std::map<std::string, std::vector<std::string>> out;
  if (policy.mode == AssignMode::Trial) {
    for (const auto& a : annotators) out[a] = samples;
    return out;
  }
  std::mt19937_64 rng(policy.seed);
  // Explicit Fisher-Yates: std::shuffle's draw sequence is library-specific.
  for (std::size_t i = samples.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(samples[i - 1], samples[pick(rng)]);
  }
  for (const auto& a : annotators) out[a];
  for (std::size_t i = 0; i < samples.size(); ++i) out[annotators[i % annotators.size()]].push_back(samples[i]);
  return out;
}

// ---------------------------------------------------------------- EventLog

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  const bool existed = std::filesystem::exists(path_);
  if (existed) {
    std::string text = read_text(path_);
    std::size_t pos = 0, good_end = 0, line_no = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      ++line_no;
      if (nl == std::string::npos) break;  // torn tail: no terminator
      std::string_view line(text.data() + pos, nl - pos);
      if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
        Json j;
        try {
          j = Json::parse(line);
        } catch (const Json::exception& e) {
          if (nl + 1 >= text.size()) break;  // torn last line
          fail(ErrorKind::Schema, path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        AnnotationEvent e = annotation::event_from_json(j, line_no);
        if (e.event_id < next_id_)
          fail(ErrorKind::Integrity, path_.string() + ":" + std::to_string(line_no) + ": event_id " +
                                         std::to_string(e.event_id) + " is not increasing");
        next_id_ = e.event_id + 1;
        events_.push_back(std::move(e));
      }
      pos = nl + 1;
      good_end = pos;
    }
    recovered_bytes_ = text.size() - good_end;
    if (recovered_bytes_ > 0) std::filesystem::resize_file(path_, good_end);
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) fail(ErrorKind::Io, "cannot open event log " + path_.string() + ": " + std::strerror(errno));
  if (!existed || recovered_bytes_ > 0) {
    ::fsync(fd_);
    fsync_dir(path_.parent_path());
  }
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t EventLog::append(AnnotationEvent& e) {
  e.event_id = next_id_;
  write_all(fd_, dump_line(annotation::to_json(e)) + '\n', path_);
  if (::fsync(fd_) != 0) fail(ErrorKind::Io, "fsync " + path_.string() + " failed: " + std::strerror(errno));
  ++next_id_;
  events_.push_back(e);
  return e.event_id;
}

// ---------------------------------------------------------------- state fold

void apply_event(AssignmentState& state, const AnnotationEvent& e) {
  switch (e.action) {
    case Action::Assign: {
      auto& entry = state[e.annotator_id][e.sample_id];
      const bool reroute = e.note && *e.note == kReannotateNote;
      if (reroute) {
        entry.status = Status::ReAnnotate;
        entry.rejected = false;
        entry.accepted = false;
        entry.submitted.clear();
        if (e.target_annotator && *e.target_annotator != e.annotator_id) {
          auto owner = state.find(*e.target_annotator);
          if (owner != state.end()) owner->second.erase(e.sample_id);
        }
      }
      if (e.round_index) entry.round_index = e.round_index;
      entry.last_event_id = e.event_id;
      return;
    }
    case Action::Save: {
      auto& entry = state[e.annotator_id][e.sample_id];
      if (e.question_id && e.option_label) entry.drafts[*e.question_id] = *e.option_label;
      entry.status = Status::InProgress;
      entry.last_event_id = e.event_id;
      return;
    }
    case Action::Submit: {
      auto& entry = state[e.annotator_id][e.sample_id];
      entry.submitted = entry.drafts;
      entry.status = Status::Completed;
      entry.rejected = false;
      entry.accepted = false;
      entry.last_event_id = e.event_id;
      return;
    }
    case Action::Report: {
      auto& entry = state[e.annotator_id][e.sample_id];
      entry.status = Status::Reported;
      entry.note = e.note;
      entry.last_event_id = e.event_id;
      return;
    }
    case Action::ReviewAccept:
    case Action::ReviewReject: {
      const std::string& target = e.target_annotator ? *e.target_annotator : e.annotator_id;
      auto& entry = state[target][e.sample_id];
      if (e.action == Action::ReviewAccept) {
        entry.accepted = true;
      } else {
        entry.rejected = true;
        entry.status = Status::ReAnnotate;
        entry.submitted.clear();
      }
      entry.last_event_id = e.event_id;
      return;
    }
  }
}

AssignmentState replay(std::span<const AnnotationEvent> events) {
  AssignmentState state;
  for (const auto& e : events) apply_event(state, e);
  return state;
}

Json to_json(const AssignmentState& state) {
  Json out = Json::object();
  for (const auto& [annotator, entries] : state) {
    Json items = Json::object();
    for (const auto& [sample, entry] : entries) {
      Json j = {{"status", to_string(entry.status)},
                {"drafts", entry.drafts},
                {"submitted", entry.submitted},
                {"last_event_id", entry.last_event_id},
                {"accepted", entry.accepted},
                {"rejected", entry.rejected}};
      if (entry.round_index) j["round_index"] = *entry.round_index;
      if (entry.note) j["note"] = *entry.note;
      items[sample] = std::move(j);
    }
    out[annotator] = std::move(items);
  }
  return out;
}

Json to_json(const RoundKappa& k) {
  Json pairs = Json::array();
  for (const auto& p : k.pairwise.pairs)
    pairs.push_back({{"a", p.a}, {"b", p.b}, {"kappa", p.kappa.to_double()}, {"kappa_exact", p.kappa.to_string()}});
  Json j = {{"round_index", k.round_index},
            {"samples", k.samples},
            {"annotators", k.annotators},
            {"items", k.items},
            {"mean_pairwise", k.pairwise.mean},
            {"min_pairwise", k.pairwise.min.to_double()},
            {"pairs", pairs}};
  if (k.pairwise.mean_exact) j["mean_pairwise_exact"] = k.pairwise.mean_exact->to_string();
  j["fleiss"] = k.fleiss ? Json(k.fleiss->to_double()) : Json(nullptr);
  if (k.warning) j["warning"] = *k.warning;
  return j;
}

std::vector<const protocol::QuestionSpec*> sample_questions(const corpus::Corpus& corpus,
                                                            const protocol::QuestionBank& bank,
                                                            const SampleRecord& sample) {
  const PromptRecord* prompt = corpus.find_prompt(sample.prompt_id);
  if (!prompt) fail(ErrorKind::DanglingReference, "sample '" + sample.sample_id + "' has no prompt");
  const EntityAnnotation& annotation = corpus.annotation_for(sample.prompt_id);
  std::vector<const protocol::QuestionSpec*> out;
  for (const auto& q : bank.questions(prompt->task))
    if (protocol::is_applicable(q, annotation)) out.push_back(&q);
  return out;
}

// ---------------------------------------------------------------- service

AnnotationService::AnnotationService(corpus::Corpus corpus, protocol::QuestionBank bank,
                                     std::vector<Account> accounts, ServiceOptions options)
    : corpus_(std::move(corpus)),
      bank_(std::move(bank)),
      accounts_(std::move(accounts)),
      options_(std::move(options)),
      log_(options_.log_path) {
  for (const auto& e : log_.events()) apply_event(state_, e);
}

std::int64_t AnnotationService::now() const {
  if (options_.clock) return options_.clock();
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

const Account& AnnotationService::authenticate(std::string_view token) const {
  for (const auto& a : accounts_)
    if (!token.empty() && a.token == token) return a;
  fail(ErrorKind::Unauthorized, "unknown or missing token");
}

const Account* AnnotationService::find_account(std::string_view id) const {
  for (const auto& a : accounts_)
    if (a.id == id) return &a;
  return nullptr;
}

const SampleRecord& AnnotationService::require_sample(std::string_view sample_id) const {
  const SampleRecord* s = corpus_.find_sample(sample_id);
  if (!s) fail(ErrorKind::NotFound, "unknown sample '" + std::string(sample_id) + "'");
  return *s;
}

AssignmentEntry& AnnotationService::require_entry(const Account& who, std::string_view sample_id) {
  require_sample(sample_id);
  auto a = state_.find(who.id);
  if (a != state_.end()) {
    auto it = a->second.find(std::string(sample_id));
    if (it != a->second.end()) return it->second;
  }
  fail(ErrorKind::Forbidden, "sample '" + std::string(sample_id) + "' is not assigned to '" + who.id + "'");
}

void AnnotationService::require_inspector(const Account& who) const {
  if (who.role != Role::Inspector) fail(ErrorKind::Forbidden, "'" + who.id + "' is not an inspector");
}

RecordResult AnnotationService::record(AnnotationEvent e, std::optional<std::uint64_t> base_event_id,
                                       std::string_view sample_id, std::string_view annotator_id) {
  RecordResult r;
  const auto& entry = state_[std::string(annotator_id)][std::string(sample_id)];
  r.stale = base_event_id && entry.last_event_id > *base_event_id;
  e.timestamp_ms = now();
  r.event_id = log_.append(e);
  apply_event(state_, e);
  r.status = state_[std::string(annotator_id)][std::string(sample_id)].status;
  round_cache_.clear();
  if (options_.snapshot_path && options_.snapshot_every > 0 && ++since_snapshot_ >= options_.snapshot_every) {
    write_snapshot_locked();
    since_snapshot_ = 0;
  }
  return r;
}

bool AnnotationService::has_assignments() const {
  std::lock_guard lock(mu_);
  return std::any_of(log_.events().begin(), log_.events().end(),
                     [](const AnnotationEvent& e) { return e.action == Action::Assign; });
}

std::size_t AnnotationService::assign(const AssignPolicy& policy, std::vector<std::string> samples,
                                      std::vector<std::string> annotators) {
  std::lock_guard lock(mu_);
  if (samples.empty())
    for (const auto& s : corpus_.samples())
      if (!s.degraded) samples.push_back(s.sample_id);
  for (const auto& s : samples) require_sample(s);
  if (annotators.empty())
    for (const auto& a : accounts_)
      if (a.role == Role::Annotator) annotators.push_back(a.id);
  for (const auto& a : annotators)
    if (!find_account(a)) fail(ErrorKind::NotFound, "unknown annotator '" + a + "'");

  auto plan = plan_assignment(std::move(samples), std::move(annotators), policy);
  std::size_t written = 0;
  for (const auto& [annotator, list] : plan) {
    for (const auto& sample : list) {
      auto a = state_.find(annotator);
      if (a != state_.end() && a->second.count(sample)) continue;
      AnnotationEvent e;
      e.annotator_id = annotator;
      e.sample_id = sample;
      e.action = Action::Assign;
      if (policy.mode == AssignMode::Trial) e.round_index = policy.round_index;
      record(std::move(e), std::nullopt, sample, annotator);
      ++written;
    }
  }
  return written;
}

RecordResult AnnotationService::save(const Account& who, std::string_view sample_id, std::string_view question_id,
                                     int option_label, std::optional<std::uint64_t> base_event_id) {
  std::lock_guard lock(mu_);
  AssignmentEntry& entry = require_entry(who, sample_id);
  if (entry.status == Status::Reported)
    fail(ErrorKind::IllegalTransition, "sample '" + std::string(sample_id) + "' was reported");
  const auto questions = sample_questions(corpus_, bank_, require_sample(sample_id));
  auto q = std::find_if(questions.begin(), questions.end(),
                        [&](const protocol::QuestionSpec* s) { return s->id == question_id; });
  if (q == questions.end())
    fail(ErrorKind::IllegalTransition,
         "question '" + std::string(question_id) + "' is not asked for sample '" + std::string(sample_id) + "'");
  if (!(*q)->find_option(option_label))
    fail(ErrorKind::IllegalTransition, std::string(question_id) + ": no option " + std::to_string(option_label));
  AnnotationEvent e;
  e.annotator_id = who.id;
  e.sample_id = std::string(sample_id);
  e.question_id = std::string(question_id);
  e.option_label = option_label;
  e.action = Action::Save;
  return record(std::move(e), base_event_id, sample_id, who.id);
}

RecordResult AnnotationService::submit(const Account& who, std::string_view sample_id,
                                       std::optional<std::uint64_t> base_event_id) {
  std::lock_guard lock(mu_);
  AssignmentEntry& entry = require_entry(who, sample_id);
  if (entry.status == Status::Reported || entry.status == Status::Completed)
    fail(ErrorKind::IllegalTransition,
         "sample '" + std::string(sample_id) + "' is already " + std::string(to_string(entry.status)));
  std::vector<std::string> missing;
  for (const auto* q : sample_questions(corpus_, bank_, require_sample(sample_id)))
    if (!entry.drafts.count(q->id)) missing.push_back(q->id);
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    fail(ErrorKind::IllegalTransition, "cannot submit '" + std::string(sample_id) + "': unanswered " + list);
  }
  AnnotationEvent e;
  e.annotator_id = who.id;
  e.sample_id = std::string(sample_id);
  e.action = Action::Submit;
  return record(std::move(e), base_event_id, sample_id, who.id);
}

RecordResult AnnotationService::report(const Account& who, std::string_view sample_id, std::string_view note) {
  std::lock_guard lock(mu_);
  AssignmentEntry& entry = require_entry(who, sample_id);
  if (note.find_first_not_of(" \t\r\n") == std::string_view::npos)
    fail(ErrorKind::IllegalTransition, "a report needs a note");
  if (entry.status == Status::Reported || entry.status == Status::Completed)
    fail(ErrorKind::IllegalTransition,
         "sample '" + std::string(sample_id) + "' is already " + std::string(to_string(entry.status)));
  AnnotationEvent e;
  e.annotator_id = who.id;
  e.sample_id = std::string(sample_id);
  e.action = Action::Report;
  e.note = std::string(note);
  return record(std::move(e), std::nullopt, sample_id, who.id);
}

RecordResult AnnotationService::review_accept(const Account& who, std::string_view sample_id,
                                              std::string_view annotator_id) {
  std::lock_guard lock(mu_);
  require_inspector(who);
  const Account* target = find_account(annotator_id);
  if (!target) fail(ErrorKind::NotFound, "unknown annotator '" + std::string(annotator_id) + "'");
  AssignmentEntry& entry = require_entry(*target, sample_id);
  if (entry.status != Status::Completed || entry.accepted || entry.rejected)
    fail(ErrorKind::IllegalTransition, "no unreviewed submission of '" + std::string(sample_id) + "' by '" +
                                           std::string(annotator_id) + "'");
  AnnotationEvent e;
  e.annotator_id = who.id;
  e.sample_id = std::string(sample_id);
  e.action = Action::ReviewAccept;
  e.target_annotator = std::string(annotator_id);
  return record(std::move(e), std::nullopt, sample_id, annotator_id);
}

RecordResult AnnotationService::review_reject(const Account& who, std::string_view sample_id,
                                              std::string_view annotator_id, std::optional<std::string> note) {
  std::lock_guard lock(mu_);
  require_inspector(who);
  const Account* target = find_account(annotator_id);
  if (!target) fail(ErrorKind::NotFound, "unknown annotator '" + std::string(annotator_id) + "'");
  AssignmentEntry& entry = require_entry(*target, sample_id);
  if (entry.status != Status::Completed || entry.accepted || entry.rejected)
    fail(ErrorKind::IllegalTransition, "no unreviewed submission of '" + std::string(sample_id) + "' by '" +
                                           std::string(annotator_id) + "'");
  const std::string sample(sample_id);
  const std::string original(annotator_id);

  AnnotationEvent reject;
  reject.annotator_id = who.id;
  reject.sample_id = sample;
  reject.action = Action::ReviewReject;
  reject.target_annotator = original;
  reject.note = std::move(note);
  RecordResult r = record(std::move(reject), std::nullopt, sample, original);

  // Prefer the least-loaded other annotator who does not hold this sample.
  std::string assignee = original;
  std::size_t best_load = SIZE_MAX;
  for (const auto& a : accounts_) {
    if (a.role != Role::Annotator || a.id == original) continue;
    auto it = state_.find(a.id);
    if (it != state_.end() && it->second.count(sample)) continue;
    std::size_t load = 0;
    if (it != state_.end())
      for (const auto& [s, en] : it->second)
        if (en.status != Status::Completed && en.status != Status::Reported) ++load;
    if (load < best_load) {
      best_load = load;
      assignee = a.id;
    }
  }
  AnnotationEvent assign;
  assign.annotator_id = assignee;
  assign.sample_id = sample;
  assign.action = Action::Assign;
  assign.note = std::string(kReannotateNote);
  assign.target_annotator = original;
  RecordResult routed = record(std::move(assign), std::nullopt, sample, assignee);
  r.reassigned_to = assignee;
  r.status = routed.status;
  return r;
}

Worklist AnnotationService::inspect_sample(std::size_t count, std::uint64_t seed) const {
  std::lock_guard lock(mu_);
  std::vector<InspectionItem> pool;
  for (const auto& [annotator, entries] : state_)
    for (const auto& [sample, entry] : entries)
      if (entry.status == Status::Completed && !entry.accepted && !entry.rejected)
        pool.push_back({sample, annotator, entry.submitted});
  std::sort(pool.begin(), pool.end(), [](const InspectionItem& a, const InspectionItem& b) {
    return std::tie(a.sample_id, a.annotator_id) < std::tie(b.sample_id, b.annotator_id);
  });
  Worklist w;
  w.available = pool.size();
  if (pool.empty()) fail(ErrorKind::NoData, "no completed annotations to inspect");
  if (count > pool.size()) {
    w.warning = "requested " + std::to_string(count) + " samples but only " + std::to_string(pool.size()) +
                " completed annotations exist; returning all";
    count = pool.size();
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  w.items = std::move(pool);
  return w;
}

Worklist AnnotationService::inspect_fraction(double fraction, std::uint64_t seed) const {
  if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorKind::Usage, "inspection fraction must be in (0, 1]");
  std::size_t available = 0;
  {
    std::lock_guard lock(mu_);
    for (const auto& [annotator, entries] : state_)
      for (const auto& [sample, entry] : entries)
        if (entry.status == Status::Completed && !entry.accepted && !entry.rejected) ++available;
  }
  auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(available)));
  return inspect_sample(std::max<std::size_t>(count, 1), seed);
}

std::vector<int> AnnotationService::rounds() const {
  std::lock_guard lock(mu_);
  std::set<int> out;
  for (const auto& [annotator, entries] : state_)
    for (const auto& [sample, entry] : entries)
      if (entry.round_index) out.insert(*entry.round_index);
  return {out.begin(), out.end()};
}

RoundKappa AnnotationService::round_kappa(int round_index) {
  std::lock_guard lock(mu_);
  if (auto it = round_cache_.find(round_index); it != round_cache_.end()) return it->second;
  RoundKappa k;
  k.round_index = round_index;
  std::set<std::string> samples, annotators;
  for (const auto& [annotator, entries] : state_)
    for (const auto& [sample, entry] : entries)
      if (entry.round_index == round_index) {
        samples.insert(sample);
        annotators.insert(annotator);
      }
  if (samples.empty()) fail(ErrorKind::NotFound, "no trial round " + std::to_string(round_index));
  k.samples.assign(samples.begin(), samples.end());
  k.annotators.assign(annotators.begin(), annotators.end());

  stats::AgreementTable table;
  table.annotators = k.annotators;
  for (const auto& sample : k.samples) {
    for (const auto* q : sample_questions(corpus_, bank_, require_sample(sample))) {
      std::vector<int> row;
      for (const auto& annotator : k.annotators) {
        const auto& entries = state_.at(annotator);
        auto it = entries.find(sample);
        if (it == entries.end() || it->second.status != Status::Completed || !it->second.submitted.count(q->id))
          fail(ErrorKind::IncompleteRound, "round " + std::to_string(round_index) + ": '" + annotator +
                                               "' has no submitted answer for " + sample + "/" + q->id);
        row.push_back(it->second.submitted.at(q->id));
      }
      table.answers.push_back(std::move(row));
    }
  }
  k.items = table.items();
  k.pairwise = stats::cohen_kappa_pairwise(table);
  try {
    k.fleiss = stats::fleiss_kappa(table);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateAgreement) throw;
    k.warning = e.what();
  }
  round_cache_[round_index] = k;
  return k;
}

AssignmentState AnnotationService::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::map<std::string, AssignmentEntry> AnnotationService::assignments(std::string_view annotator_id) const {
  std::lock_guard lock(mu_);
  auto it = state_.find(std::string(annotator_id));
  return it == state_.end() ? std::map<std::string, AssignmentEntry>{} : it->second;
}

std::optional<AssignmentEntry> AnnotationService::entry(std::string_view annotator_id,
                                                        std::string_view sample_id) const {
  std::lock_guard lock(mu_);
  auto a = state_.find(std::string(annotator_id));
  if (a == state_.end()) return std::nullopt;
  auto it = a->second.find(std::string(sample_id));
  if (it == a->second.end()) return std::nullopt;
  return it->second;
}

std::vector<AnnotationEvent> AnnotationService::events() const {
  std::lock_guard lock(mu_);
  return log_.events();
}

std::vector<annotation::FinalAnswer> AnnotationService::final_answers() const {
  std::lock_guard lock(mu_);
  return annotation::final_answers(log_.events());
}

std::string AnnotationService::export_sft_jsonl() const {
  const auto answers = final_answers();
  return corpus::sft_jsonl(corpus::export_sft(corpus_, bank_, answers));
}

Json AnnotationService::dashboard() {
  Json annotators = Json::array();
  std::vector<int> round_ids;
  std::size_t events = 0;
  {
    std::lock_guard lock(mu_);
    events = log_.events().size();
    for (const auto& acc : accounts_) {
      if (acc.role != Role::Annotator) continue;
      std::map<std::string, std::size_t> counts;
      for (Status s : {Status::Pending, Status::InProgress, Status::Completed, Status::Reported, Status::ReAnnotate})
        counts[std::string(to_string(s))] = 0;
      std::size_t total = 0;
      if (auto it = state_.find(acc.id); it != state_.end())
        for (const auto& [sample, entry] : it->second) {
          ++counts[std::string(to_string(entry.status))];
          ++total;
        }
      annotators.push_back({{"annotator_id", acc.id}, {"total", total}, {"counts", counts}});
    }
  }
  round_ids = rounds();
  Json rounds_json = Json::array();
  for (int r : round_ids) {
    try {
      rounds_json.push_back(to_json(round_kappa(r)));
    } catch (const Error& e) {
      rounds_json.push_back({{"round_index", r}, {"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}});
    }
  }
  return {{"annotators", annotators}, {"rounds", rounds_json}, {"events", events}};
}

void AnnotationService::write_snapshot_locked() const {
  if (!options_.snapshot_path) return;
  Json doc = {{"last_event_id", log_.next_id() - 1}, {"events", log_.events().size()}, {"state", to_json(state_)}};
  const auto& path = *options_.snapshot_path;
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << "\n";
    out.flush();
    if (!out) fail(ErrorKind::Io, "cannot write snapshot " + tmp.string());
  }
  int fd = ::open(tmp.c_str(), O_RDONLY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
  std::filesystem::rename(tmp, path);
  fsync_dir(path.parent_path());
}

void AnnotationService::write_snapshot() const {
  std::lock_guard lock(mu_);
  write_snapshot_locked();
}

}  // namespace t2ieval::annosvc
