// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "t2ieval/annotation_event.hpp"
#include "t2ieval/jsonl.hpp"
#include "t2ieval/protocol.hpp"

namespace t2ieval {

struct PromptFlags {
  bool toxic = false;
  bool nsfw = false;

  bool any() const { return toxic || nsfw; }
  friend bool operator==(const PromptFlags&, const PromptFlags&) = default;
};

struct PromptRecord {
  std::string prompt_id;
  std::string text;
  std::string source;
  TaskKind task = TaskKind::Alignment;
  std::size_t word_count = 0;
  PromptFlags flags;
  Json extra = Json::object();  // unknown manifest fields, preserved on write
};

// Entities of one prompt with their annotated attributes. `categories` tags
// entities ("human", "animal", "object", ...) for faithfulness curation and
// the category histogram.
struct EntityAnnotation {
  std::string prompt_id;
  std::vector<std::string> objects;
  std::vector<std::pair<std::string, int>> counts;
  std::vector<std::pair<std::string, std::string>> colors;
  std::vector<std::string> spatial;
  std::vector<std::pair<std::string, std::string>> actions;
  std::optional<std::string> style;
  std::map<std::string, std::string> categories;
  Json extra = Json::object();

  bool has(Attribute attr) const;
};

enum class Split { Train, Val, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct SampleRecord {
  std::string sample_id;
  std::string prompt_id;
  std::string generator_id;
  std::string image_uri;
  Split split = Split::Test;
  bool degraded = false;  // image not resolvable at ingest
  Json extra = Json::object();
};

struct SftTriplet {
  std::string sample_id;
  std::string question_id;
  std::string prompt_id;
  std::string annotator_id;
  std::string question_text;  // Q: rendered instruction
  std::string image_uri;      // M: image ...
  std::string prompt_text;    // ... plus prompt context
  std::string answer_text;    // A: option sentence chosen by the human
  int option_label = 0;
};

std::size_t count_words(std::string_view text);

namespace corpus {

// Read-only view over an ingested manifest.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<PromptRecord> prompts, std::vector<EntityAnnotation> annotations,
         std::vector<SampleRecord> samples);

  const std::vector<PromptRecord>& prompts() const { return prompts_; }
  const std::vector<EntityAnnotation>& annotations() const { return annotations_; }
  const std::vector<SampleRecord>& samples() const { return samples_; }

  const PromptRecord* find_prompt(std::string_view id) const;
  const SampleRecord* find_sample(std::string_view id) const;
  // Prompts without an annotation record get an empty annotation.
  const EntityAnnotation& annotation_for(std::string_view prompt_id) const;

  // Annotation keyed by prompt id, for curate().
  std::map<std::string, EntityAnnotation> annotation_map() const;

  // Local path or URL the backend should read for a sample's image.
  std::string image_location(const SampleRecord& sample) const;
  void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }
  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  std::vector<PromptRecord> prompts_;
  std::vector<EntityAnnotation> annotations_;
  std::vector<SampleRecord> samples_;
  std::map<std::string, std::size_t, std::less<>> prompt_index_;
  std::map<std::string, std::size_t, std::less<>> sample_index_;
  std::map<std::string, std::size_t, std::less<>> annotation_index_;
  EntityAnnotation empty_annotation_;
  std::filesystem::path base_dir_;
};

bool is_remote_uri(std::string_view uri);

// Manifest: one JSON object per line, "type" is "prompt", "annotation" or
// "sample". Relative image paths resolve against the manifest directory.
Corpus ingest_manifest(const std::filesystem::path& path);
Corpus ingest_records(const std::vector<JsonLine>& records, const std::filesystem::path& base_dir,
                      std::string_view origin = "manifest");
void write_manifest(const Corpus& corpus, const std::filesystem::path& path);
std::vector<Json> manifest_records(const Corpus& corpus);

Json to_json(const PromptRecord& p);
Json to_json(const EntityAnnotation& a);
Json to_json(const SampleRecord& s);

// Entity categories that make a prompt usable for faithfulness evaluation.
bool is_tangible_category(std::string_view category);

// target_count 0 keeps every survivor. Throws InsufficientPrompts when fewer
// than target_count survive.
std::vector<PromptRecord> curate(std::span<const PromptRecord> prompts,
                                 const std::map<std::string, EntityAnnotation>& annotations, TaskKind task,
                                 std::size_t target_count);

struct DatasetStats {
  std::map<std::string, std::size_t> prompts_per_task;
  std::map<std::string, std::size_t> samples_per_generator;
  std::map<std::string, std::size_t> category_histogram;  // prompts per entity category
  std::map<std::string, std::size_t> split_sizes;
  std::map<std::string, std::size_t> generators_per_split;
  std::size_t degraded_samples = 0;
  std::size_t flagged_prompts = 0;
};

DatasetStats dataset_stats(const Corpus& corpus);
Json to_json(const DatasetStats& stats);

// One triplet per final (sample, question) answer, ordered by
// (sample_id, question_id). Reported samples are skipped.
std::vector<SftTriplet> export_sft(const Corpus& corpus, const protocol::QuestionBank& bank,
                                   std::span<const annotation::AnnotationEvent> events);
std::vector<SftTriplet> export_sft(const Corpus& corpus, const protocol::QuestionBank& bank,
                                   std::span<const annotation::FinalAnswer> answers);
Json to_json(const SftTriplet& t);
std::string sft_jsonl(std::span<const SftTriplet> triplets);

}  // namespace corpus
}  // namespace t2ieval
