// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/protocol.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "t2ieval/corpus.hpp"
#include "t2ieval/errors.hpp"

namespace t2ieval {

namespace {

constexpr std::array<Attribute, 6> kAttributes = {Attribute::Object, Attribute::Count,   Attribute::Color,
                                                  Attribute::Style,  Attribute::Spatial, Attribute::Action};

}  // namespace

std::string_view to_string(TaskKind task) {
  return task == TaskKind::Faithfulness ? "faithfulness" : "alignment";
}

TaskKind parse_task(std::string_view text) {
  if (text == "faithfulness") return TaskKind::Faithfulness;
  if (text == "alignment") return TaskKind::Alignment;
  fail(ErrorKind::Schema, "unknown task '" + std::string(text) + "'");
}

std::string_view to_string(Attribute attr) {
  switch (attr) {
    case Attribute::Object: return "object";
    case Attribute::Count: return "count";
    case Attribute::Color: return "color";
    case Attribute::Style: return "style";
    case Attribute::Spatial: return "spatial";
    case Attribute::Action: return "action";
  }
  return "object";
}

Attribute parse_attribute(std::string_view text) {
  for (Attribute a : kAttributes)
    if (to_string(a) == text) return a;
  fail(ErrorKind::Schema, "unknown attribute '" + std::string(text) + "'");
}

std::string_view placeholder_token(Attribute attr) {
  switch (attr) {
    case Attribute::Object: return "<ObjectHere>";
    case Attribute::Count: return "<NumberHere>";
    case Attribute::Color: return "<ColorHere>";
    case Attribute::Style: return "<StyleHere>";
    case Attribute::Spatial: return "<SpatialHere>";
    case Attribute::Action: return "<ActionHere>";
  }
  return "<ObjectHere>";
}

}  // namespace t2ieval

namespace t2ieval::protocol {

namespace {

std::vector<OptionSpec> make_options(int first_label, int first_score, std::initializer_list<const char*> texts) {
  std::vector<OptionSpec> out;
  int label = first_label;
  int score = first_score;
  for (const char* t : texts) out.push_back({label++, t, Rational(score++)});
  return out;
}

// Faithfulness Q1-Q3: label 0 means the subject is absent; 1..5 score 0..4.
std::vector<OptionSpec> absent_then_graded(const char* absent, std::initializer_list<const char*> graded) {
  std::vector<OptionSpec> out{{0, absent, Rational(0)}};
  auto rest = make_options(1, 0, graded);
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

QuestionSpec faith(std::string id, std::string text, std::vector<OptionSpec> options, std::optional<int> na) {
  QuestionSpec q;
  q.id = std::move(id);
  q.task = TaskKind::Faithfulness;
  q.template_text = std::move(text);
  q.options = std::move(options);
  q.not_applicable_label = na;
  return q;
}

QuestionSpec align(std::string id, Attribute attr, std::string text, std::initializer_list<const char*> options) {
  QuestionSpec q;
  q.id = std::move(id);
  q.task = TaskKind::Alignment;
  q.template_text = std::move(text);
  q.options = make_options(1, 1, options);
  q.applicability = attr;
  return q;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ", ";
    out += parts[i];
  }
  return out;
}

template <typename V>
std::vector<std::string> keyed(const std::vector<std::pair<std::string, V>>& pairs) {
  std::vector<std::string> out;
  for (const auto& [entity, value] : pairs) {
    if constexpr (std::is_same_v<V, int>)
      out.push_back(entity + ": " + std::to_string(value));
    else
      out.push_back(entity + ": " + value);
  }
  return out;
}

// Tokens of the form <...Here> that the template alphabet does not define.
void check_placeholder_alphabet(const QuestionSpec& q) {
  const std::string& t = q.template_text;
  std::size_t pos = 0;
  while ((pos = t.find('<', pos)) != std::string::npos) {
    auto end = t.find('>', pos);
    if (end == std::string::npos) break;
    std::string_view tok(t.data() + pos, end - pos + 1);
    if (tok.size() > 6 && tok.substr(tok.size() - 5) == "Here>") {
      bool known = std::any_of(kAttributes.begin(), kAttributes.end(),
                               [&](Attribute a) { return placeholder_token(a) == tok; });
      if (!known) fail(ErrorKind::Schema, q.id + ": placeholder " + std::string(tok) + " has no filler rule");
    }
    pos = end + 1;
  }
}

}  // namespace

const OptionSpec* QuestionSpec::find_option(int label) const {
  for (const auto& o : options)
    if (o.label == label) return &o;
  return nullptr;
}

std::vector<Attribute> QuestionSpec::placeholders() const {
  std::vector<Attribute> out;
  for (Attribute a : kAttributes)
    if (template_text.find(placeholder_token(a)) != std::string::npos) out.push_back(a);
  return out;
}

QuestionBank::QuestionBank(std::vector<QuestionSpec> faithfulness, std::vector<QuestionSpec> alignment)
    : faithfulness_(std::move(faithfulness)), alignment_(std::move(alignment)) {}

const std::vector<QuestionSpec>& QuestionBank::questions(TaskKind task) const {
  return task == TaskKind::Faithfulness ? faithfulness_ : alignment_;
}

std::vector<const QuestionSpec*> QuestionBank::all() const {
  std::vector<const QuestionSpec*> out;
  for (const auto& q : faithfulness_) out.push_back(&q);
  for (const auto& q : alignment_) out.push_back(&q);
  return out;
}

const QuestionSpec* QuestionBank::find(std::string_view id) const {
  for (const auto* q : all())
    if (q->id == id) return q;
  return nullptr;
}

const QuestionSpec& QuestionBank::at(std::string_view id) const {
  const QuestionSpec* q = find(id);
  if (!q) fail(ErrorKind::DanglingReference, "unknown question '" + std::string(id) + "'");
  return *q;
}

QuestionBank builtin_banks() {
  std::vector<QuestionSpec> f;
  f.push_back(faith(
      "faith.body",
      "Are there any issues with the [human/animals] body structure in the image, such as multiple arms, missing "
      "limbs or legs when not obscured, multiple heads, limb amputations, and etc?",
      absent_then_graded(
          "There are no human or animal body in the picture",
          {"The body structure of the people or animals in the picture has a very grievous problem that is unbearable",
           "The body structure of the people or animals in the picture has some serious problems and is not acceptable",
           "The body structure of the people or animals in the picture has a slight problem that does not affect the "
           "senses",
           "The body structure of the people or animals in the picture is basically fine, with only a few flaws",
           "The body structure of the people or animals in the picture is completely fine and close to reality."}),
      0));
  f.push_back(faith(
      "faith.hand",
      "Are there any issues with the [human/animals] hands in the image, such as having more or less than five "
      "fingers when not obscured, broken fingers, disproportionate finger sizes, abnormal nail size proportions, and "
      "etc?",
      absent_then_graded("No human or animal hands are shown in the picture",
                         {"The hand in the picture has a very grievous problem that is unbearable",
                          "The hand in the picture has some serious problems and is not acceptable",
                          "The hand in the picture has a slight problem that does not affect the senses",
                          "The hand in the picture is basically fine, with only a few flaws",
                          "The hands in the picture are completely fine and close to reality."}),
      0));
  f.push_back(faith(
      "faith.face",
      "Are there any issues with [human/animals] face in the image, such as facial distortion, asymmetrical faces, "
      "abnormal facial features, unusual expressions in the eyes, and etc?",
      absent_then_graded(
          "There is no face of any person or animal in the picture",
          {"The face of the person or animal in the picture has a very grievous problem that is unbearable",
           "The face of the person or animal in the picture has some serious problems and is not acceptable",
           "The face of the person or animal in the picture has a slight problem that does not affect the senses",
           "The face of the person or animal in the picture is basically fine, with only a few flaws",
           "The face of the person or animal in the picture is completely fine and close to reality."}),
      0));
  f.push_back(faith(
      "faith.object",
      "Are there any issues or tentative errors with objects in the image that do not correspond with the real "
      "world, such as distortion of items, and etc?",
      make_options(0, 0,
                   {"There are objects in the image that completely do not match the real world, which is very "
                    "serious and intolerable",
                    "There are objects in the image that do not match the real world, which is quite serious and "
                    "unacceptable",
                    "There are slightly unrealistic objects in the image that do not affect the senses",
                    "There are basically no objects in the image that do not match the real world, only some flaws",
                    "All objects in the image match the real world, no problem."}),
      std::nullopt));
  f.push_back(faith(
      "faith.commonsense",
      "Does the generated image contain elements that violate common sense or logical rules, such as animal/human "
      "with inconsistent anatomy, object-context mismatch, impossible physics, scale and proportion issues, temporal "
      "and spatial inconsistencies, hybrid objects, and etc?",
      make_options(0, 0,
                   {"The image contains elements that violate common sense or logical rules, which is very grievous "
                    "and intolerable",
                    "The presence of elements in the image that seriously violate common sense or logical rules is "
                    "unacceptable",
                    "The image contains elements that violate common sense or logical rules, which is slightly "
                    "problematic and does not affect the senses",
                    "There are basically no elements in the image that violate common sense or logical rules, only "
                    "some flaws",
                    "There are no elements in the image that violate common sense or logical rules, and they are "
                    "close to reality."}),
      std::nullopt));

  std::vector<QuestionSpec> a;
  a.push_back(align("align.object", Attribute::Object,
                    "Does the given image contain all the objects (<ObjectHere>) presented in the corresponding "
                    "prompts?",
                    {"None objects are included", "Some objects are missing", "All objects are included."}));
  a.push_back(align("align.count", Attribute::Count,
                    "Does the given image correctly reflect the numbers (<NumberHere>) of each object presented in "
                    "the corresponding prompts?",
                    {"All counting numbers are wrong", "Some of them are wrong", "All counting numbers are right."}));
  a.push_back(align("align.color", Attribute::Color,
                    "Does the given image correctly reflect the colors of each object (<ColorHere>) presented in the "
                    "corresponding prompts?",
                    {"All colors are wrong", "Some of them are wrong", "All corresponding colors numbers are right."}));
  a.push_back(align("align.style", Attribute::Style,
                    "Does the given image correctly reflect the style (<StyleHere>) described in the corresponding "
                    "prompts?",
                    {"All styles are wrong", "Some of them are wrong", "All styles are right."}));
  a.push_back(align("align.spatial", Attribute::Spatial,
                    "Does the given image correctly reflect the spatial relationship (<SpatialHere>) of each object "
                    "described in the corresponding prompts?",
                    {"All spatial relationships are wrong", "Some of them are wrong",
                     "All spatial relationships are right."}));
  a.push_back(align("align.action", Attribute::Action,
                    "Does the given image correctly reflect the action of each object (<ActionHere>) described in "
                    "the corresponding prompts?",
                    {"All actions are wrong", "Some of them are wrong", "All actions are right."}));
  return QuestionBank(std::move(f), std::move(a));
}

void validate(const QuestionSpec& q) {
  if (q.id.empty()) fail(ErrorKind::Schema, "question without id");
  if (q.options.size() < 2) fail(ErrorKind::Schema, q.id + ": fewer than two options");
  for (std::size_t i = 0; i < q.options.size(); ++i) {
    if (q.options[i].text.empty()) fail(ErrorKind::Schema, q.id + ": empty option text");
    if (q.options[i].label != q.options.front().label + static_cast<int>(i))
      fail(ErrorKind::Schema, q.id + ": option labels must be unique and contiguous");
  }
  if (q.not_applicable_label && !q.has_label(*q.not_applicable_label))
    fail(ErrorKind::Schema, q.id + ": not_applicable_label names no option");
  check_placeholder_alphabet(q);
  auto ph = q.placeholders();
  if (q.task == TaskKind::Faithfulness && !ph.empty())
    fail(ErrorKind::Schema, q.id + ": faithfulness templates take no placeholders");
  if (q.task == TaskKind::Alignment) {
    if (!q.applicability) fail(ErrorKind::Schema, q.id + ": alignment question without applicability attribute");
    for (Attribute a : ph)
      if (a != *q.applicability)
        fail(ErrorKind::Schema, q.id + ": placeholder " + std::string(placeholder_token(a)) +
                                    " is not covered by the applicability attribute");
  }
}

void validate(const QuestionBank& bank) {
  if (bank.faithfulness().size() != 5)
    fail(ErrorKind::Schema, "faithfulness bank must have 5 questions, got " +
                                std::to_string(bank.faithfulness().size()));
  if (bank.alignment().size() != 6)
    fail(ErrorKind::Schema, "alignment bank must have 6 questions, got " + std::to_string(bank.alignment().size()));
  std::set<std::string> ids;
  for (TaskKind task : {TaskKind::Faithfulness, TaskKind::Alignment}) {
    for (const auto& q : bank.questions(task)) {
      if (q.task != task) fail(ErrorKind::Schema, q.id + ": filed under the wrong task");
      validate(q);
      if (!ids.insert(q.id).second) fail(ErrorKind::Schema, "duplicate question id '" + q.id + "'");
    }
  }
  std::set<Attribute> covered;
  for (const auto& q : bank.alignment()) covered.insert(*q.applicability);
  if (covered.size() != kAttributes.size())
    fail(ErrorKind::Schema, "alignment bank must cover each attribute exactly once");
}

bool is_applicable(const QuestionSpec& q, const EntityAnnotation& annotation) {
  if (q.task == TaskKind::Faithfulness || !q.applicability) return true;
  return annotation.has(*q.applicability);
}

std::string attribute_text(Attribute attr, const EntityAnnotation& a) {
  std::vector<std::string> parts;
  switch (attr) {
    case Attribute::Object: parts = a.objects; break;
    case Attribute::Count: parts = keyed(a.counts); break;
    case Attribute::Color: parts = keyed(a.colors); break;
    case Attribute::Style:
      if (a.style && !a.style->empty()) parts.push_back(*a.style);
      break;
    case Attribute::Spatial: parts = a.spatial; break;
    case Attribute::Action: parts = keyed(a.actions); break;
  }
  if (parts.empty())
    fail(ErrorKind::MissingAttribute,
         "prompt '" + a.prompt_id + "' has no " + std::string(to_string(attr)) + " annotation");
  return join(parts) + ".";
}

std::string fill_template(const QuestionSpec& q, const EntityAnnotation& annotation) {
  std::string text = q.template_text;
  for (Attribute attr : q.placeholders()) {
    const std::string token(placeholder_token(attr));
    const std::string value = attribute_text(attr, annotation);
    std::size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
      text.replace(pos, token.size(), value);
      pos += value.size();
    }
  }
  return text;
}

RenderedInstruction render(const QuestionSpec& q, const EntityAnnotation& annotation, std::string_view image_ref,
                           std::string_view sample_id) {
  RenderedInstruction r;
  r.sample_id = std::string(sample_id);
  r.question_id = q.id;
  r.image_ref = std::string(image_ref);
  r.option_index = q.options;
  r.final_text = fill_template(q, annotation);
  r.final_text += "\n[OPTIONS]:\n";
  for (std::size_t i = 0; i < q.options.size(); ++i) {
    r.final_text += std::to_string(q.options[i].label) + "." + q.options[i].text;
    if (i + 1 < q.options.size()) r.final_text += ";\n";
  }
  return r;
}

Json to_json(const QuestionBank& bank) {
  auto question_json = [](const QuestionSpec& q) {
    Json options = Json::array();
    for (const auto& o : q.options)
      options.push_back({{"label", o.label}, {"text", o.text}, {"score", o.score.to_string()}});
    Json j = {{"id", q.id}, {"task", to_string(q.task)}, {"template", q.template_text}, {"options", options}};
    if (q.not_applicable_label) j["not_applicable_label"] = *q.not_applicable_label;
    if (q.applicability) j["applicability"] = to_string(*q.applicability);
    return j;
  };
  Json doc = {{"version", kProtocolVersion}, {"faithfulness", Json::array()}, {"alignment", Json::array()}};
  for (const auto& q : bank.faithfulness()) doc["faithfulness"].push_back(question_json(q));
  for (const auto& q : bank.alignment()) doc["alignment"].push_back(question_json(q));
  return doc;
}

QuestionBank bank_from_json(const Json& doc) {
  if (!doc.is_object()) fail(ErrorKind::Schema, "protocol: document is not an object");
  auto version = doc.find("version");
  if (version == doc.end() || !version->is_number_integer() || version->get<int>() != kProtocolVersion)
    fail(ErrorKind::Schema, "protocol: unsupported version (expected " + std::to_string(kProtocolVersion) + ")");

  auto read_bank = [&](const char* key) {
    std::vector<QuestionSpec> out;
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_array()) fail(ErrorKind::Schema, std::string("protocol: missing '") + key + "'");
    std::size_t index = 0;
    for (const auto& jq : *it) {
      ++index;
      QuestionSpec q;
      q.id = require_string(jq, "id", index);
      q.task = parse_task(require_string(jq, "task", index));
      q.template_text = require_string(jq, "template", index);
      const Json& opts = require_field(jq, "options", index);
      if (!opts.is_array()) fail(ErrorKind::Schema, q.id + ": options must be a list");
      for (const auto& jo : opts) {
        OptionSpec o;
        o.label = static_cast<int>(require_int(jo, "label", index));
        o.text = require_string(jo, "text", index);
        const Json& score = require_field(jo, "score", index);
        if (score.is_string()) {
          auto r = Rational::try_parse(score.get<std::string>());
          if (!r) fail(ErrorKind::Schema, q.id + ": bad score '" + score.get<std::string>() + "'");
          o.score = *r;
        } else if (score.is_number_integer()) {
          o.score = Rational(score.get<std::int64_t>());
        } else {
          fail(ErrorKind::Schema, q.id + ": score must be an integer or rational string");
        }
        q.options.push_back(std::move(o));
      }
      if (auto na = jq.find("not_applicable_label"); na != jq.end() && !na->is_null())
        q.not_applicable_label = na->get<int>();
      if (auto ap = jq.find("applicability"); ap != jq.end() && !ap->is_null())
        q.applicability = parse_attribute(ap->get<std::string>());
      out.push_back(std::move(q));
    }
    return out;
  };

  QuestionBank bank(read_bank("faithfulness"), read_bank("alignment"));
  validate(bank);
  return bank;
}

std::string protocol_text(const QuestionBank& bank) { return to_json(bank).dump(2) + "\n"; }

QuestionBank load_protocol(const std::filesystem::path& path) {
  Json doc;
  try {
    doc = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::Schema, path.string() + ": " + e.what());
  }
  return bank_from_json(doc);
}

void save_protocol(const QuestionBank& bank, const std::filesystem::path& path) {
  write_text(path, protocol_text(bank));
}

}  // namespace t2ieval::protocol
