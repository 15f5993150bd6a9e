// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "t2ieval/errors.hpp"

namespace t2ieval {

bool EntityAnnotation::has(Attribute attr) const {
  switch (attr) {
    case Attribute::Object: return !objects.empty();
    case Attribute::Count: return !counts.empty();
    case Attribute::Color: return !colors.empty();
    case Attribute::Style: return style.has_value() && !style->empty();
    case Attribute::Spatial: return !spatial.empty();
    case Attribute::Action: return !actions.empty();
  }
  return false;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "test";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  fail(ErrorKind::Schema, "unknown split '" + std::string(text) + "'");
}

std::size_t count_words(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

}  // namespace t2ieval

namespace t2ieval::corpus {

namespace {

[[noreturn]] void integrity(std::string_view origin, std::size_t line, const std::string& msg) {
  fail(ErrorKind::Integrity, std::string(origin) + ":" + std::to_string(line) + ": " + msg);
}

[[noreturn]] void schema(std::string_view origin, std::size_t line, const std::string& msg) {
  fail(ErrorKind::Schema, std::string(origin) + ":" + std::to_string(line) + ": " + msg);
}

Json leftover(const Json& obj, std::initializer_list<const char*> known) {
  Json extra = Json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (it.key() == "type") continue;
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return it.key() == k; }) == known.end())
      extra[it.key()] = it.value();
  }
  return extra;
}

// Wraps field accessors so their errors carry the manifest name.
template <typename F>
auto with_origin(std::string_view origin, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Schema) fail(ErrorKind::Schema, std::string(origin) + ": " + e.what());
    throw;
  }
}

PromptRecord parse_prompt(const Json& j, std::size_t line) {
  PromptRecord p;
  p.prompt_id = require_string(j, "prompt_id", line);
  p.text = require_string(j, "text", line);
  p.source = j.contains("source") ? require_string(j, "source", line) : "user";
  p.task = parse_task(require_string(j, "task", line));
  p.word_count = count_words(p.text);
  for (const auto& f : string_list(j, "flags", line)) {
    if (f == "toxic") p.flags.toxic = true;
    else if (f == "nsfw") p.flags.nsfw = true;
    else fail(ErrorKind::Schema, "line " + std::to_string(line) + ": unknown flag '" + f + "'");
  }
  p.extra = leftover(j, {"prompt_id", "text", "source", "task", "flags", "word_count"});
  return p;
}

template <typename V>
std::vector<std::pair<std::string, V>> entity_pairs(const Json& j, const char* key, const char* value_key,
                                                    std::size_t line) {
  std::vector<std::pair<std::string, V>> out;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return out;
  if (!it->is_array())
    fail(ErrorKind::Schema, "line " + std::to_string(line) + ": field '" + key + "' must be a list");
  for (const auto& item : *it) {
    std::string entity = require_string(item, "entity", line);
    if constexpr (std::is_same_v<V, int>)
      out.emplace_back(std::move(entity), static_cast<int>(require_int(item, value_key, line)));
    else
      out.emplace_back(std::move(entity), require_string(item, value_key, line));
  }
  return out;
}

EntityAnnotation parse_annotation(const Json& j, std::size_t line) {
  EntityAnnotation a;
  a.prompt_id = require_string(j, "prompt_id", line);
  a.objects = string_list(j, "objects", line);
  a.counts = entity_pairs<int>(j, "counts", "count", line);
  a.colors = entity_pairs<std::string>(j, "colors", "color", line);
  a.spatial = string_list(j, "spatial", line);
  a.actions = entity_pairs<std::string>(j, "actions", "action", line);
  if (j.contains("style") && !j["style"].is_null()) a.style = require_string(j, "style", line);
  if (auto it = j.find("categories"); it != j.end() && !it->is_null()) {
    if (!it->is_object())
      fail(ErrorKind::Schema, "line " + std::to_string(line) + ": field 'categories' must be an object");
    for (auto c = it->begin(); c != it->end(); ++c) {
      if (!c->is_string())
        fail(ErrorKind::Schema, "line " + std::to_string(line) + ": category of '" + c.key() + "' must be a string");
      a.categories[c.key()] = c->get<std::string>();
    }
  }
  a.extra = leftover(j, {"prompt_id", "objects", "counts", "colors", "spatial", "actions", "style", "categories"});
  return a;
}

SampleRecord parse_sample(const Json& j, std::size_t line) {
  SampleRecord s;
  s.sample_id = require_string(j, "sample_id", line);
  s.prompt_id = require_string(j, "prompt_id", line);
  s.generator_id = require_string(j, "generator_id", line);
  s.image_uri = require_string(j, "image_uri", line);
  s.split = j.contains("split") ? parse_split(require_string(j, "split", line)) : Split::Test;
  s.extra = leftover(j, {"sample_id", "prompt_id", "generator_id", "image_uri", "split", "degraded"});
  return s;
}

void check_annotation(const EntityAnnotation& a, std::string_view origin, std::size_t line) {
  std::set<std::string> objects(a.objects.begin(), a.objects.end());
  auto check_entity = [&](const std::string& entity, const char* what) {
    if (!objects.count(entity))
      integrity(origin, line, std::string(what) + " entity '" + entity + "' of prompt '" + a.prompt_id +
                                  "' is not among its objects");
  };
  for (const auto& [entity, n] : a.counts) {
    check_entity(entity, "count");
    if (n < 1) integrity(origin, line, "count of '" + entity + "' must be >= 1");
  }
  for (const auto& [entity, c] : a.colors) check_entity(entity, "color");
  for (const auto& [entity, act] : a.actions) check_entity(entity, "action");
  for (const auto& [entity, cat] : a.categories) check_entity(entity, "category");
}

void merge_extra(Json& j, const Json& extra) {
  for (auto it = extra.begin(); it != extra.end(); ++it)
    if (!j.contains(it.key())) j[it.key()] = it.value();
}

}  // namespace

bool is_remote_uri(std::string_view uri) {
  return uri.rfind("http://", 0) == 0 || uri.rfind("https://", 0) == 0 || uri.rfind("data:", 0) == 0;
}

Corpus::Corpus(std::vector<PromptRecord> prompts, std::vector<EntityAnnotation> annotations,
               std::vector<SampleRecord> samples)
    : prompts_(std::move(prompts)), annotations_(std::move(annotations)), samples_(std::move(samples)) {
  for (std::size_t i = 0; i < prompts_.size(); ++i) prompt_index_.emplace(prompts_[i].prompt_id, i);
  for (std::size_t i = 0; i < samples_.size(); ++i) sample_index_.emplace(samples_[i].sample_id, i);
  for (std::size_t i = 0; i < annotations_.size(); ++i) annotation_index_.emplace(annotations_[i].prompt_id, i);
}

const PromptRecord* Corpus::find_prompt(std::string_view id) const {
  auto it = prompt_index_.find(id);
  return it == prompt_index_.end() ? nullptr : &prompts_[it->second];
}

const SampleRecord* Corpus::find_sample(std::string_view id) const {
  auto it = sample_index_.find(id);
  return it == sample_index_.end() ? nullptr : &samples_[it->second];
}

const EntityAnnotation& Corpus::annotation_for(std::string_view prompt_id) const {
  auto it = annotation_index_.find(prompt_id);
  return it == annotation_index_.end() ? empty_annotation_ : annotations_[it->second];
}

std::map<std::string, EntityAnnotation> Corpus::annotation_map() const {
  std::map<std::string, EntityAnnotation> out;
  for (const auto& a : annotations_) out.emplace(a.prompt_id, a);
  return out;
}

std::string Corpus::image_location(const SampleRecord& sample) const {
  std::string_view uri = sample.image_uri;
  if (is_remote_uri(uri)) return std::string(uri);
  if (uri.rfind("file://", 0) == 0) uri.remove_prefix(7);
  std::filesystem::path p{std::string(uri)};
  if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
  return p.lexically_normal().string();
}

Corpus ingest_records(const std::vector<JsonLine>& records, const std::filesystem::path& base_dir,
                      std::string_view origin) {
  std::vector<PromptRecord> prompts;
  std::vector<EntityAnnotation> annotations;
  std::vector<SampleRecord> samples;
  std::vector<std::size_t> annotation_lines, sample_lines;
  std::set<std::string> prompt_ids, sample_ids, annotated;

  for (const auto& rec : records) {
    const Json& j = rec.value;
    std::string type = with_origin(origin, [&] { return require_string(j, "type", rec.line); });
    if (type == "prompt") {
      auto p = with_origin(origin, [&] { return parse_prompt(j, rec.line); });
      if (!prompt_ids.insert(p.prompt_id).second) integrity(origin, rec.line, "duplicate prompt_id '" + p.prompt_id + "'");
      prompts.push_back(std::move(p));
    } else if (type == "annotation") {
      auto a = with_origin(origin, [&] { return parse_annotation(j, rec.line); });
      if (!annotated.insert(a.prompt_id).second)
        integrity(origin, rec.line, "duplicate annotation for prompt '" + a.prompt_id + "'");
      check_annotation(a, origin, rec.line);
      annotations.push_back(std::move(a));
      annotation_lines.push_back(rec.line);
    } else if (type == "sample") {
      auto s = with_origin(origin, [&] { return parse_sample(j, rec.line); });
      if (!sample_ids.insert(s.sample_id).second) integrity(origin, rec.line, "duplicate sample_id '" + s.sample_id + "'");
      samples.push_back(std::move(s));
      sample_lines.push_back(rec.line);
    } else {
      schema(origin, rec.line, "unknown record type '" + type + "'");
    }
  }

  for (std::size_t i = 0; i < annotations.size(); ++i)
    if (!prompt_ids.count(annotations[i].prompt_id))
      integrity(origin, annotation_lines[i], "annotation references unknown prompt '" + annotations[i].prompt_id + "'");

  std::set<std::tuple<Split, std::string, std::string>> pairs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!prompt_ids.count(s.prompt_id))
      integrity(origin, sample_lines[i], "sample '" + s.sample_id + "' references unknown prompt '" + s.prompt_id + "'");
    if (!pairs.emplace(s.split, s.prompt_id, s.generator_id).second)
      integrity(origin, sample_lines[i], "sample '" + s.sample_id + "' repeats (prompt '" + s.prompt_id +
                                             "', generator '" + s.generator_id + "') within split " +
                                             std::string(to_string(s.split)));
  }

  Corpus corpus(std::move(prompts), std::move(annotations), std::move(samples));
  corpus.set_base_dir(base_dir);
  // Degraded marking needs the base dir, so it runs on the built handle.
  std::vector<SampleRecord> marked = corpus.samples();
  for (auto& s : marked) {
    if (is_remote_uri(s.image_uri)) continue;
    std::error_code ec;
    s.degraded = !std::filesystem::is_regular_file(corpus.image_location(s), ec);
  }
  Corpus out(corpus.prompts(), corpus.annotations(), std::move(marked));
  out.set_base_dir(base_dir);
  return out;
}

Corpus ingest_manifest(const std::filesystem::path& path) {
  auto records = read_jsonl(path);
  return ingest_records(records, path.parent_path(), path.string());
}

Json to_json(const PromptRecord& p) {
  Json j = {{"type", "prompt"}, {"prompt_id", p.prompt_id}, {"text", p.text}, {"source", p.source},
            {"task", to_string(p.task)}, {"word_count", p.word_count}};
  Json flags = Json::array();
  if (p.flags.toxic) flags.push_back("toxic");
  if (p.flags.nsfw) flags.push_back("nsfw");
  if (!flags.empty()) j["flags"] = flags;
  merge_extra(j, p.extra);
  return j;
}

Json to_json(const EntityAnnotation& a) {
  Json j = {{"type", "annotation"}, {"prompt_id", a.prompt_id}, {"objects", a.objects}};
  auto pairs = [](const auto& list, const char* value_key) {
    Json arr = Json::array();
    for (const auto& [entity, value] : list) arr.push_back({{"entity", entity}, {value_key, value}});
    return arr;
  };
  if (!a.counts.empty()) j["counts"] = pairs(a.counts, "count");
  if (!a.colors.empty()) j["colors"] = pairs(a.colors, "color");
  if (!a.spatial.empty()) j["spatial"] = a.spatial;
  if (!a.actions.empty()) j["actions"] = pairs(a.actions, "action");
  if (a.style) j["style"] = *a.style;
  if (!a.categories.empty()) j["categories"] = a.categories;
  merge_extra(j, a.extra);
  return j;
}

Json to_json(const SampleRecord& s) {
  Json j = {{"type", "sample"},          {"sample_id", s.sample_id}, {"prompt_id", s.prompt_id},
            {"generator_id", s.generator_id}, {"image_uri", s.image_uri}, {"split", to_string(s.split)}};
  merge_extra(j, s.extra);
  return j;
}

std::vector<Json> manifest_records(const Corpus& corpus) {
  std::vector<Json> out;
  for (const auto& p : corpus.prompts()) out.push_back(to_json(p));
  for (const auto& a : corpus.annotations()) out.push_back(to_json(a));
  for (const auto& s : corpus.samples()) out.push_back(to_json(s));
  return out;
}

void write_manifest(const Corpus& corpus, const std::filesystem::path& path) {
  write_jsonl(path, manifest_records(corpus));
}

bool is_tangible_category(std::string_view category) {
  return category == "human" || category == "animal" || category == "object";
}

std::vector<PromptRecord> curate(std::span<const PromptRecord> prompts,
                                 const std::map<std::string, EntityAnnotation>& annotations, TaskKind task,
                                 std::size_t target_count) {
  static const EntityAnnotation kEmpty;
  std::map<std::string, std::vector<const PromptRecord*>> by_source;
  std::size_t survivors = 0;
  for (const auto& p : prompts) {
    if (p.flags.any()) continue;
    auto it = annotations.find(p.prompt_id);
    const EntityAnnotation& a = it == annotations.end() ? kEmpty : it->second;
    bool keep = false;
    if (task == TaskKind::Alignment) {
      bool attributed = a.has(Attribute::Object) || a.has(Attribute::Count) || a.has(Attribute::Color) ||
                        a.has(Attribute::Style) || a.has(Attribute::Spatial) || a.has(Attribute::Action);
      keep = attributed && p.word_count > 15;
    } else {
      keep = std::any_of(a.categories.begin(), a.categories.end(),
                         [](const auto& kv) { return is_tangible_category(kv.second); });
    }
    if (!keep) continue;
    by_source[p.source].push_back(&p);
    ++survivors;
  }
  if (target_count == 0) target_count = survivors;
  if (survivors < target_count)
    fail(ErrorKind::InsufficientPrompts, std::to_string(survivors) + " prompts survive curation for " +
                                             std::string(to_string(task)) + ", " + std::to_string(target_count) +
                                             " requested");

  std::vector<PromptRecord> out;
  out.reserve(target_count);
  for (std::size_t round = 0; out.size() < target_count; ++round) {
    for (const auto& [source, list] : by_source) {
      if (out.size() == target_count) break;
      if (round < list.size()) {
        out.push_back(*list[round]);
        out.back().task = task;
      }
    }
  }
  return out;
}

DatasetStats dataset_stats(const Corpus& corpus) {
  DatasetStats st;
  st.prompts_per_task = {{"alignment", 0}, {"faithfulness", 0}};
  st.split_sizes = {{"test", 0}, {"train", 0}, {"val", 0}};
  st.generators_per_split = st.split_sizes;
  for (const auto& p : corpus.prompts()) {
    ++st.prompts_per_task[std::string(to_string(p.task))];
    if (p.flags.any()) ++st.flagged_prompts;
  }
  for (const auto& a : corpus.annotations()) {
    std::set<std::string> cats;
    for (const auto& [entity, cat] : a.categories) cats.insert(cat);
    for (const auto& c : cats) ++st.category_histogram[c];
  }
  std::map<std::string, std::set<std::string>> gens;
  for (const auto& s : corpus.samples()) {
    ++st.samples_per_generator[s.generator_id];
    std::string split(to_string(s.split));
    ++st.split_sizes[split];
    gens[split].insert(s.generator_id);
    if (s.degraded) ++st.degraded_samples;
  }
  for (const auto& [split, set] : gens) st.generators_per_split[split] = set.size();
  return st;
}

Json to_json(const DatasetStats& st) {
  return {{"prompts_per_task", st.prompts_per_task},
          {"samples_per_generator", st.samples_per_generator},
          {"category_histogram", st.category_histogram},
          {"split_sizes", st.split_sizes},
          {"generators_per_split", st.generators_per_split},
          {"degraded_samples", st.degraded_samples},
          {"flagged_prompts", st.flagged_prompts}};
}

std::vector<SftTriplet> export_sft(const Corpus& corpus, const protocol::QuestionBank& bank,
                                   std::span<const annotation::FinalAnswer> answers) {
  std::vector<SftTriplet> out;
  out.reserve(answers.size());
  for (const auto& fa : answers) {
    const SampleRecord* sample = corpus.find_sample(fa.sample_id);
    if (!sample) fail(ErrorKind::DanglingReference, "answer references unknown sample '" + fa.sample_id + "'");
    const protocol::QuestionSpec* q = bank.find(fa.question_id);
    if (!q) fail(ErrorKind::DanglingReference, "answer references unknown question '" + fa.question_id + "'");
    const protocol::OptionSpec* opt = q->find_option(fa.option_label);
    if (!opt)
      fail(ErrorKind::DanglingReference, "answer for " + fa.sample_id + "/" + fa.question_id + " names option " +
                                             std::to_string(fa.option_label) + " which does not exist");
    const PromptRecord* prompt = corpus.find_prompt(sample->prompt_id);
    SftTriplet t;
    t.sample_id = fa.sample_id;
    t.question_id = fa.question_id;
    t.prompt_id = sample->prompt_id;
    t.annotator_id = fa.annotator_id;
    t.question_text = protocol::render(*q, corpus.annotation_for(sample->prompt_id), sample->image_uri).final_text;
    t.image_uri = sample->image_uri;
    t.prompt_text = prompt ? prompt->text : std::string();
    t.answer_text = opt->text;
    t.option_label = opt->label;
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end(), [](const SftTriplet& a, const SftTriplet& b) {
    return std::tie(a.sample_id, a.question_id) < std::tie(b.sample_id, b.question_id);
  });
  return out;
}

std::vector<SftTriplet> export_sft(const Corpus& corpus, const protocol::QuestionBank& bank,
                                   std::span<const annotation::AnnotationEvent> events) {
  for (const auto& e : events) {
    if (!corpus.find_sample(e.sample_id))
      fail(ErrorKind::DanglingReference,
           "event " + std::to_string(e.event_id) + " references unknown sample '" + e.sample_id + "'");
    if (e.question_id && !bank.find(*e.question_id))
      fail(ErrorKind::DanglingReference,
           "event " + std::to_string(e.event_id) + " references unknown question '" + *e.question_id + "'");
  }
  auto answers = annotation::final_answers(events);
  return export_sft(corpus, bank, std::span<const annotation::FinalAnswer>(answers));
}

Json to_json(const SftTriplet& t) {
  return {{"question", t.question_text},
          {"image", t.image_uri},
          {"answer", t.answer_text},
          {"prompt", t.prompt_text},
          {"ids",
           {{"sample_id", t.sample_id},
            {"question_id", t.question_id},
            {"prompt_id", t.prompt_id},
            {"annotator_id", t.annotator_id},
            {"option_label", t.option_label}}}};
}

std::string sft_jsonl(std::span<const SftTriplet> triplets) {
  std::string out;
  for (const auto& t : triplets) {
    out += dump_line(to_json(t));
    out += '\n';
  }
  return out;
}

}  // namespace t2ieval::corpus
