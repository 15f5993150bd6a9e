// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/jsonl.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "t2ieval/errors.hpp"

namespace t2ieval {

std::vector<JsonLine> parse_jsonl(std::string_view text, std::string_view origin) {
  std::vector<JsonLine> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      out.push_back({line_no, Json::parse(line)});
    } catch (const Json::parse_error& e) {
      fail(ErrorKind::Schema, std::string(origin) + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
  }
  return out;
}

std::vector<JsonLine> read_jsonl(const std::filesystem::path& path) {
  return parse_jsonl(read_text(path), path.string());
}

std::string dump_line(const Json& value) {
  return value.dump(-1, ' ', false, Json::error_handler_t::replace);
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
  std::string content;
  for (const auto& r : records) {
    content += dump_line(r);
    content += '\n';
  }
  write_text(path, content);
}

void write_text(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorKind::Io, "short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return std::to_string(value);
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '+')) text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    fail(ErrorKind::Schema, "not a number: '" + std::string(text) + "'");
  return v;
}

const Json& require_field(const Json& obj, std::string_view key, std::size_t line) {
  if (!obj.is_object()) fail(ErrorKind::Schema, "line " + std::to_string(line) + ": record is not an object");
  auto it = obj.find(std::string(key));
  if (it == obj.end() || it->is_null())
    fail(ErrorKind::Schema, "line " + std::to_string(line) + ": missing field '" + std::string(key) + "'");
  return *it;
}

std::string require_string(const Json& obj, std::string_view key, std::size_t line) {
  const Json& v = require_field(obj, key, line);
  if (!v.is_string())
    fail(ErrorKind::Schema, "line " + std::to_string(line) + ": field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

std::int64_t require_int(const Json& obj, std::string_view key, std::size_t line) {
  const Json& v = require_field(obj, key, line);
  if (!v.is_number_integer())
    fail(ErrorKind::Schema, "line " + std::to_string(line) + ": field '" + std::string(key) + "' must be an integer");
  return v.get<std::int64_t>();
}

std::vector<std::string> string_list(const Json& obj, std::string_view key, std::size_t line) {
  std::vector<std::string> out;
  auto it = obj.find(std::string(key));
  if (it == obj.end() || it->is_null()) return out;
  if (!it->is_array())
    fail(ErrorKind::Schema, "line " + std::to_string(line) + ": field '" + std::string(key) + "' must be a list");
  for (const auto& v : *it) {
    if (!v.is_string())
      fail(ErrorKind::Schema,
           "line " + std::to_string(line) + ": field '" + std::string(key) + "' must contain strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace t2ieval
