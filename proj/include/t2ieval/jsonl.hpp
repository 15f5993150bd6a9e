// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace t2ieval {

using Json = nlohmann::json;

// One parsed record of a line-delimited file, with its 1-based line number.
struct JsonLine {
  std::size_t line = 0;
  Json value;
};

// Reads a UTF-8 line-delimited JSON file; blank lines are skipped. Parse
// failures throw Error(Schema) naming the file and line.
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);
std::vector<JsonLine> parse_jsonl(std::string_view text, std::string_view origin);

// Compact single-line dump; keys are emitted in sorted order so output is
// byte-stable for identical content.
std::string dump_line(const Json& value);

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);
void write_text(const std::filesystem::path& path, std::string_view content);
std::string read_text(const std::filesystem::path& path);

// Shortest decimal that round-trips to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

// Typed field accessors that raise Error(Schema) with line context.
const Json& require_field(const Json& obj, std::string_view key, std::size_t line);
std::string require_string(const Json& obj, std::string_view key, std::size_t line);
std::int64_t require_int(const Json& obj, std::string_view key, std::size_t line);
std::vector<std::string> string_list(const Json& obj, std::string_view key, std::size_t line);

}  // namespace t2ieval
