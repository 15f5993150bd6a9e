// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include "t2ieval/errors.hpp"

namespace t2ieval::parsing {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool is_markup(char c) {
  switch (c) {
    case '*': case '_': case '#': case '`': case '>': case '"': case '\'':
    case '(': case '[': case '{': case '-': case ':':
      return true;
    default:
      return std::isspace(static_cast<unsigned char>(c)) != 0;
  }
}

std::optional<int> to_label(std::string_view digits) {
  if (digits.empty() || digits.size() > 3) return std::nullopt;
  int v = 0;
  for (char c : digits) v = v * 10 + (c - '0');
  return v;
}

std::optional<int> leading_digit(std::string_view text, const protocol::QuestionSpec& q) {
  std::size_t i = 0;
  while (i < text.size() && is_markup(text[i])) ++i;
  std::size_t j = i;
  while (j < text.size() && is_digit(text[j])) ++j;
  if (j == i) return std::nullopt;
  // "3rd" or "3.5" are not bare labels.
  if (j < text.size() && is_alnum(text[j])) return std::nullopt;
  if (j + 1 < text.size() && (text[j] == '.' || text[j] == ',') && is_digit(text[j + 1])) return std::nullopt;
  auto label = to_label(text.substr(i, j - i));
  if (label && q.has_label(*label)) return label;
  return std::nullopt;
}

const std::vector<std::regex>& labeled_patterns() {
  static const std::vector<std::regex> patterns = [] {
    auto flags = std::regex::ECMAScript | std::regex::icase;
    return std::vector<std::regex>{
        std::regex(R"(\boption\s*(?:no\.?|number|#)?\s*[:=]?\s*\(?(\d+)(?!\d))", flags),
        std::regex(R"(\banswer\s*(?:is|would be)?\s*[:=]?\s*(?:option\s*)?\(?(\d+)(?!\d))", flags),
        std::regex(R"((?:^|[\s(\[*])(\d+)\.(?!\d))", flags),
    };
  }();
  return patterns;
}

std::optional<int> labeled_option(const std::string& text, const protocol::QuestionSpec& q) {
  std::vector<std::pair<std::ptrdiff_t, int>> hits;
  for (const auto& re : labeled_patterns()) {
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
      auto label = to_label((*it)[1].str());
      if (label && q.has_label(*label)) hits.emplace_back((*it).position(1), *label);
    }
  }
  if (hits.empty()) return std::nullopt;
  return std::min_element(hits.begin(), hits.end())->second;
}

std::optional<int> fallback_digit(std::string_view text, const protocol::QuestionSpec& q) {
  std::set<int> seen;
  for (std::size_t i = 0; i < text.size();) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_digit(text[j])) ++j;
    bool bounded = (i == 0 || !is_alnum(text[i - 1])) && (j == text.size() || !is_alnum(text[j]));
    if (bounded)
      if (auto label = to_label(text.substr(i, j - i)); label && q.has_label(*label)) seen.insert(*label);
    i = j;
  }
  if (seen.size() == 1) return *seen.begin();
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::LeadingDigit: return "leading_digit";
    case Method::LabeledOption: return "labeled_option";
    case Method::OptionTextMatch: return "option_text_match";
    case Method::Fallback: return "fallback";
  }
  return "leading_digit";
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::LeadingDigit, Method::LabeledOption, Method::OptionTextMatch, Method::Fallback})
    if (to_string(m) == text) return m;
  fail(ErrorKind::Schema, "unknown parse method '" + std::string(text) + "'");
}

std::string_view to_string(Confidence c) { return c == Confidence::Exact ? "exact" : "fuzzy"; }

Confidence parse_confidence(std::string_view text) {
  if (text == "exact") return Confidence::Exact;
  if (text == "fuzzy") return Confidence::Fuzzy;
  fail(ErrorKind::Schema, "unknown confidence '" + std::string(text) + "'");
}

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || (c < 0x80 && std::ispunct(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  return out;
}

std::vector<std::string> tokens(std::string_view text) {
  std::istringstream in(normalize(text));
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(std::move(t));
  return out;
}

double option_coverage(const std::vector<std::string>& response, const std::vector<std::string>& option) {
  if (option.empty()) return 0.0;
  // Longest common substring over tokens, rolling DP row.
  std::vector<std::size_t> prev(option.size() + 1, 0), cur(option.size() + 1, 0);
  std::size_t best = 0;
  for (std::size_t i = 1; i <= response.size(); ++i) {
    for (std::size_t j = 1; j <= option.size(); ++j) {
      cur[j] = response[i - 1] == option[j - 1] ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(best) / static_cast<double>(option.size());
}

ParsedChoice extract_option(std::string_view raw_text, const protocol::QuestionSpec& q, const ParseConfig& cfg) {
  ParsedChoice c;
  c.question_id = q.id;

  if (auto label = leading_digit(raw_text, q)) {
    c.option_label = *label;
    c.method = Method::LeadingDigit;
    return c;
  }
  if (auto label = labeled_option(std::string(raw_text), q)) {
    c.option_label = *label;
    c.method = Method::LabeledOption;
    return c;
  }

  auto resp = tokens(raw_text);
  double best = -1, runner_up = -1;
  const protocol::OptionSpec* best_option = nullptr;
  for (const auto& o : q.options) {
    double cov = option_coverage(resp, tokens(o.text));
    if (cov > best) {
      runner_up = best;
      best = cov;
      best_option = &o;
    } else if (cov > runner_up) {
      runner_up = cov;
    }
  }
  if (best_option && best >= cfg.min_coverage) {
    if (best - runner_up < cfg.min_margin)
      fail(ErrorKind::AmbiguousMatch, q.id + ": response matches several options equally well");
    c.option_label = best_option->label;
    c.method = Method::OptionTextMatch;
    c.confidence = best >= 1.0 ? Confidence::Exact : Confidence::Fuzzy;
    return c;
  }

  if (cfg.enable_fallback) {
    if (auto label = fallback_digit(raw_text, q)) {
      c.option_label = *label;
      c.method = Method::Fallback;
      c.confidence = Confidence::Fuzzy;
      return c;
    }
  }
  fail(ErrorKind::Unparseable, q.id + ": no option could be extracted");
}

ParseBatchResult parse_batch(std::span<const backend::InferenceResponse> responses, const protocol::QuestionBank& bank,
                             const ParseConfig& cfg) {
  ParseBatchResult out;
  for (const auto& r : responses) {
    auto flag = [&](std::string reason) {
      out.flagged.push_back({r.sample_id, r.question_id, r.raw_text, std::move(reason)});
    };
    if (r.finish_reason == backend::FinishReason::Error) {
      flag(std::string(to_string(r.error_kind.value_or(ErrorKind::Internal))) + ": " + r.error);
      continue;
    }
    const protocol::QuestionSpec* q = bank.find(r.question_id);
    if (!q) {
      flag("unknown question");
      continue;
    }
    try {
      ParsedChoice c = extract_option(r.raw_text, *q, cfg);
      c.sample_id = r.sample_id;
      ++out.method_counts[std::string(to_string(c.method))];
      out.parsed.push_back(std::move(c));
    } catch (const Error& e) {
      flag(std::string(to_string(e.kind())) + ": " + e.what());
    }
  }
  return out;
}

Json to_json(const ParsedChoice& c) {
  return {{"sample_id", c.sample_id},
          {"question_id", c.question_id},
          {"option_label", c.option_label},
          {"method", to_string(c.method)},
          {"confidence", to_string(c.confidence)}};
}

ParsedChoice parsed_choice_from_json(const Json& j, std::size_t line) {
  ParsedChoice c;
  c.sample_id = require_string(j, "sample_id", line);
  c.question_id = require_string(j, "question_id", line);
  c.option_label = static_cast<int>(require_int(j, "option_label", line));
  if (j.contains("method")) c.method = parse_method(require_string(j, "method", line));
  if (j.contains("confidence")) c.confidence = parse_confidence(require_string(j, "confidence", line));
  return c;
}

Json to_json(const FlaggedResponse& f) {
  return {{"sample_id", f.sample_id}, {"question_id", f.question_id}, {"raw_text", f.raw_text}, {"reason", f.reason}};
}

}  // namespace t2ieval::parsing
