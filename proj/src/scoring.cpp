// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/scoring.hpp"

#include <algorithm>

#include "t2ieval/errors.hpp"

namespace t2ieval::scoring {

namespace {

std::optional<Rational> mean_of(const std::vector<Rational>& values) {
  if (values.empty()) return std::nullopt;
  Rational sum;
  for (const auto& v : values) sum += v;
  return sum / Rational(static_cast<std::int64_t>(values.size()));
}

ScoreReport aggregate(std::span<const ImageScore> images, std::string_view generator_id, bool strict) {
  if (images.empty()) fail(ErrorKind::NoData, "no scored images for generator '" + std::string(generator_id) + "'");
  ScoreReport r;
  r.generator_id = std::string(generator_id);
  r.n_images = images.size();
  std::vector<Rational> f, a;
  std::map<std::string, std::vector<Rational>> cats;
  for (const auto& img : images) {
    if (img.generator_id != generator_id)
      fail(ErrorKind::MixedTask, "image '" + img.sample_id + "' belongs to '" + img.generator_id + "', not '" +
                                     std::string(generator_id) + "'");
    bool f_ok = !strict || img.unparsed_faithfulness == 0;
    bool a_ok = !strict || img.unparsed_alignment == 0;
    if (img.faithfulness && f_ok) f.push_back(*img.faithfulness);
    if (img.alignment && a_ok) a.push_back(*img.alignment);
    for (const auto& q : img.per_question) {
      bool ok = q.task == TaskKind::Faithfulness ? f_ok : a_ok;
      if (q.applicable && q.score && ok) cats[q.question_id].push_back(*q.score);
    }
  }
  r.evalalign_f = mean_of(f);
  r.evalalign_a = mean_of(a);
  r.n_faithfulness = f.size();
  r.n_alignment = a.size();
  for (const auto& [qid, values] : cats) {
    r.per_category[qid] = *mean_of(values);
    r.per_category_n[qid] = values.size();
  }
  return r;
}

std::string cell(const std::optional<Rational>& v) { return v ? v->to_exact_string() : std::string(); }

Json rational_json(const std::optional<Rational>& v) { return v ? Json(v->to_string()) : Json(nullptr); }

}  // namespace

std::string_view to_string(AggregationMode mode) { return mode == AggregationMode::Sum ? "sum" : "mean"; }

AggregationMode parse_mode(std::string_view text) {
  if (text == "sum") return AggregationMode::Sum;
  if (text == "mean") return AggregationMode::Mean;
  fail(ErrorKind::Config, "unknown aggregation mode '" + std::string(text) + "'");
}

QuestionScore score_question(const parsing::ParsedChoice& choice, const protocol::QuestionSpec& q) {
  const protocol::OptionSpec* opt = q.find_option(choice.option_label);
  if (!opt)
    fail(ErrorKind::DanglingReference,
         q.id + ": option " + std::to_string(choice.option_label) + " is not a label of this question");
  QuestionScore s;
  s.sample_id = choice.sample_id;
  s.question_id = q.id;
  s.task = q.task;
  s.option_label = opt->label;
  s.applicable = !(q.not_applicable_label && *q.not_applicable_label == opt->label);
  if (s.applicable) s.score = opt->score;
  return s;
}

QuestionScore inapplicable(std::string_view sample_id, const protocol::QuestionSpec& q) {
  QuestionScore s;
  s.sample_id = std::string(sample_id);
  s.question_id = q.id;
  s.task = q.task;
  return s;
}

std::optional<Rational> score_image(std::span<const QuestionScore> per_question, TaskKind task, AggregationMode mode) {
  Rational sum;
  std::int64_t n = 0;
  for (const auto& q : per_question) {
    if (q.task != task)
      fail(ErrorKind::MixedTask, "question '" + q.question_id + "' is " + std::string(to_string(q.task)) +
                                     ", expected " + std::string(to_string(task)));
    if (q.sample_id != per_question.front().sample_id)
      fail(ErrorKind::MixedTask, "entries span samples '" + per_question.front().sample_id + "' and '" +
                                     q.sample_id + "'");
    if (!q.applicable || !q.score) continue;
    sum += *q.score;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return mode == AggregationMode::Sum ? sum : sum / Rational(n);
}

std::size_t ImageScore::applicable_count(TaskKind task) const {
  return static_cast<std::size_t>(std::count_if(per_question.begin(), per_question.end(), [&](const QuestionScore& q) {
    return q.task == task && q.applicable && q.score;
  }));
}

ImageScore score_sample(std::string_view sample_id, std::string_view generator_id,
                        std::vector<QuestionScore> per_question, const ScoringConfig& cfg,
                        std::size_t unparsed_faithfulness, std::size_t unparsed_alignment) {
  ImageScore img;
  img.sample_id = std::string(sample_id);
  img.generator_id = std::string(generator_id);
  img.faithfulness_mode = cfg.faithfulness;
  img.alignment_mode = cfg.alignment;
  img.unparsed_faithfulness = unparsed_faithfulness;
  img.unparsed_alignment = unparsed_alignment;
  std::vector<QuestionScore> f, a;
  for (const auto& q : per_question) (q.task == TaskKind::Faithfulness ? f : a).push_back(q);
  img.faithfulness = score_image(f, TaskKind::Faithfulness, cfg.faithfulness);
  img.alignment = score_image(a, TaskKind::Alignment, cfg.alignment);
  img.per_question = std::move(per_question);
  return img;
}

ScoreReport aggregate_model(std::span<const ImageScore> images, std::string_view generator_id) {
  return aggregate(images, generator_id, false);
}

ScoreReport aggregate_model_strict(std::span<const ImageScore> images, std::string_view generator_id) {
  return aggregate(images, generator_id, true);
}

std::map<std::string, std::vector<ImageScore>> score_choices(const corpus::Corpus& corpus,
                                                             const protocol::QuestionBank& bank,
                                                             std::span<const parsing::ParsedChoice> choices,
                                                             const ScoringConfig& cfg,
                                                             const std::vector<TaskKind>& tasks) {
  std::map<std::string, std::map<std::string, const parsing::ParsedChoice*>> by_sample;
  for (const auto& c : choices) {
    if (!corpus.find_sample(c.sample_id))
      fail(ErrorKind::DanglingReference, "parsed choice references unknown sample '" + c.sample_id + "'");
    if (!bank.find(c.question_id))
      fail(ErrorKind::DanglingReference, "parsed choice references unknown question '" + c.question_id + "'");
    by_sample[c.sample_id][c.question_id] = &c;
  }

  std::map<std::string, std::vector<ImageScore>> out;
  for (const auto& [sample_id, answers] : by_sample) {
    const SampleRecord& sample = *corpus.find_sample(sample_id);
    const EntityAnnotation& annotation = corpus.annotation_for(sample.prompt_id);
    std::vector<QuestionScore> per_question;
    std::size_t unparsed_f = 0, unparsed_a = 0;
    for (TaskKind task : tasks) {
      for (const auto& q : bank.questions(task)) {
        auto it = answers.find(q.id);
        if (it != answers.end()) {
          per_question.push_back(score_question(*it->second, q));
        } else if (!protocol::is_applicable(q, annotation)) {
          per_question.push_back(inapplicable(sample_id, q));
        } else {
          ++(task == TaskKind::Faithfulness ? unparsed_f : unparsed_a);
        }
      }
    }
    out[sample.generator_id].push_back(
        score_sample(sample_id, sample.generator_id, std::move(per_question), cfg, unparsed_f, unparsed_a));
  }
  return out;
}

Json to_json(const ScoreReport& r) {
  Json cats = Json::object();
  for (const auto& [qid, v] : r.per_category)
    cats[qid] = {{"mean", v.to_string()}, {"value", v.to_double()}, {"n", r.per_category_n.at(qid)}};
  Json j = {{"generator_id", r.generator_id},
            {"n_images", r.n_images},
            {"n_faithfulness", r.n_faithfulness},
            {"n_alignment", r.n_alignment},
            {"evalalign_f", rational_json(r.evalalign_f)},
            {"evalalign_a", rational_json(r.evalalign_a)},
            {"per_category", cats}};
  j["evalalign_f_value"] = r.evalalign_f ? Json(r.evalalign_f->to_double()) : Json(nullptr);
  j["evalalign_a_value"] = r.evalalign_a ? Json(r.evalalign_a->to_double()) : Json(nullptr);
  return j;
}

Json to_json(const ImageScore& s) {
  Json qs = Json::array();
  for (const auto& q : s.per_question) {
    Json jq = {{"question_id", q.question_id}, {"task", to_string(q.task)}, {"applicable", q.applicable}};
    jq["option_label"] = q.option_label ? Json(*q.option_label) : Json(nullptr);
    jq["score"] = rational_json(q.score);
    qs.push_back(std::move(jq));
  }
  return {{"sample_id", s.sample_id},
          {"generator_id", s.generator_id},
          {"faithfulness", rational_json(s.faithfulness)},
          {"alignment", rational_json(s.alignment)},
          {"faithfulness_mode", to_string(s.faithfulness_mode)},
          {"alignment_mode", to_string(s.alignment_mode)},
          {"applicable_faithfulness", s.applicable_count(TaskKind::Faithfulness)},
          {"applicable_alignment", s.applicable_count(TaskKind::Alignment)},
          {"unparsed_faithfulness", s.unparsed_faithfulness},
          {"unparsed_alignment", s.unparsed_alignment},
          {"per_question", qs}};
}

std::string reports_csv(std::span<const ScoreReport> reports, const protocol::QuestionBank& bank) {
  std::string out = "generator_id,evalalign_f,evalalign_a";
  auto questions = bank.all();
  for (const auto* q : questions) out += "," + q->id;
  out += "\n";
  for (const auto& r : reports) {
    out += r.generator_id + "," + cell(r.evalalign_f) + "," + cell(r.evalalign_a);
    for (const auto* q : questions) {
      auto it = r.per_category.find(q->id);
      out += "," + (it == r.per_category.end() ? std::string() : cell(it->second));
    }
    out += "\n";
  }
  return out;
}

}  // namespace t2ieval::scoring
