// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "t2ieval/backend.hpp"
#include "t2ieval/jsonl.hpp"
#include "t2ieval/parsing.hpp"
#include "t2ieval/scoring.hpp"

namespace t2ieval::cli {

// Every recognised key with its default. Sections mirror the subcommands.
Json default_config();

// Deep-merges `layer` into `cfg`. Unknown keys and type changes throw
// Error(Config); `where` prefixes the message.
void merge_config(Json& cfg, const Json& layer, std::string_view where);

// Config file: a JSON object shaped like default_config().
Json read_config_file(const std::filesystem::path& path);

// "section.key=value". The value is read as JSON when it parses as JSON and
// as a plain string otherwise; a comma list fills array-valued keys.
void apply_override(Json& cfg, std::string_view assignment);
void set_value(Json& cfg, std::string_view dotted_key, const Json& value);
const Json& get_value(const Json& cfg, std::string_view dotted_key);

std::string get_string(const Json& cfg, std::string_view key);
bool get_bool(const Json& cfg, std::string_view key);

backend::BackendConfig backend_config(const Json& cfg);
parsing::ParseConfig parse_config(const Json& cfg);
scoring::ScoringConfig scoring_config(const Json& cfg);

}  // namespace t2ieval::cli
