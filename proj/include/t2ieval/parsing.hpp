// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "t2ieval/backend.hpp"
#include "t2ieval/protocol.hpp"

namespace t2ieval::parsing {

enum class Method { LeadingDigit, LabeledOption, OptionTextMatch, Fallback };
enum class Confidence { Exact, Fuzzy };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);
std::string_view to_string(Confidence c);
Confidence parse_confidence(std::string_view text);

struct ParsedChoice {
  std::string sample_id;
  std::string question_id;
  int option_label = 0;
  Method method = Method::LeadingDigit;
  Confidence confidence = Confidence::Exact;

  friend bool operator==(const ParsedChoice&, const ParsedChoice&) = default;
};

struct ParseConfig {
  double min_coverage = 0.6;  // share of an option's tokens matched contiguously
  double min_margin = 0.1;    // lead of the best option over the runner-up
  bool enable_fallback = false;
};

// Lower-cased, punctuation replaced by spaces, whitespace collapsed.
std::string normalize(std::string_view text);
std::vector<std::string> tokens(std::string_view text);

// Longest run of consecutive tokens shared by response and option, divided by
// the option's token count.
double option_coverage(const std::vector<std::string>& response, const std::vector<std::string>& option);

// Rules in priority order: LeadingDigit, LabeledOption, OptionTextMatch,
// Fallback (off by default). Throws Error(Unparseable) or Error(AmbiguousMatch).
ParsedChoice extract_option(std::string_view raw_text, const protocol::QuestionSpec& question,
                            const ParseConfig& cfg = {});

struct FlaggedResponse {
  std::string sample_id;
  std::string question_id;
  std::string raw_text;
  std::string reason;
};

struct ParseBatchResult {
  std::vector<ParsedChoice> parsed;
  std::vector<FlaggedResponse> flagged;
  std::map<std::string, std::size_t> method_counts;
};

ParseBatchResult parse_batch(std::span<const backend::InferenceResponse> responses, const protocol::QuestionBank& bank,
                             const ParseConfig& cfg = {});

Json to_json(const ParsedChoice& c);
ParsedChoice parsed_choice_from_json(const Json& j, std::size_t line = 0);
Json to_json(const FlaggedResponse& f);

}  // namespace t2ieval::parsing
