// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/cli/config.hpp"

#include "t2ieval/errors.hpp"

namespace t2ieval::cli {

namespace {

std::vector<std::string> split_key(std::string_view dotted) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    auto dot = dotted.find('.', pos);
    parts.emplace_back(dotted.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos));
    if (parts.back().empty()) fail(ErrorKind::Config, "malformed config key '" + std::string(dotted) + "'");
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
  return parts;
}

// Whether `value` may replace `current` (the default's type decides).
bool compatible(const Json& current, const Json& value, bool nullable) {
  if (value.is_null()) return nullable;
  if (nullable && current.is_null()) return value.is_number_unsigned() || value.is_number_integer();
  if (current.is_boolean()) return value.is_boolean();
  if (current.is_number_float()) return value.is_number();
  if (current.is_number_integer()) return value.is_number_integer();
  if (current.is_string()) return value.is_string();
  if (current.is_array()) {
    for (const auto& v : value)
      if (!v.is_string()) return false;
    return value.is_array();
  }
  return false;
}

// Keys whose default is null but which take an integer.
bool nullable_key(std::string_view dotted) { return dotted == "backend.seed"; }

void merge_into(Json& cfg, const Json& layer, const std::string& prefix, std::string_view where) {
  if (!layer.is_object()) fail(ErrorKind::Config, std::string(where) + ": '" + prefix + "' must be an object");
  for (const auto& [key, value] : layer.items()) {
    const std::string dotted = prefix.empty() ? key : prefix + "." + key;
    if (!cfg.contains(key)) fail(ErrorKind::Config, std::string(where) + ": unknown config key '" + dotted + "'");
    Json& current = cfg[key];
    if (current.is_object()) {
      merge_into(current, value, dotted, where);
      continue;
    }
    Json v = value;
    if (current.is_number_float() && v.is_number()) v = v.get<double>();
    if (!compatible(current, v, nullable_key(dotted)))
      fail(ErrorKind::Config, std::string(where) + ": '" + dotted + "' expects " + current.type_name() +
                                  ", got " + std::string(value.type_name()));
    current = std::move(v);
  }
}

}  // namespace

Json default_config() {
  return Json::parse(R"({
    "seed": 0,
    "out": "out",
    "corpus": {"manifest": ""},
    "protocol": {"path": ""},
    "curate": {"task": "alignment", "target": 0},
    "backend": {
      "kind": "mock",
      "endpoint": "",
      "model": "mock",
      "max_new_tokens": 32,
      "temperature": 0.0,
      "seed": null,
      "timeout_s": 60.0,
      "max_retries": 3,
      "max_concurrency": 4,
      "retry_backoff_ms": 200,
      "api_key_env": "T2IEVAL_API_KEY",
      "script": "",
      "replay_log": "",
      "cache_path": ""
    },
    "evaluate": {"tasks": ["faithfulness", "alignment"]},
    "parse": {"min_coverage": 0.6, "min_margin": 0.1, "fallback": false, "strict": false},
    "score": {
      "parsed": "",
      "faithfulness_mode": "mean",
      "alignment_mode": "sum",
      "external": "",
      "format": "markdown",
      "intensity": false
    },
    "correlate": {
      "table": "",
      "human": "human",
      "metrics": [],
      "reported": "",
      "tolerance": 0.01,
      "bootstrap": 0,
      "format": "markdown"
    },
    "export": {"events": ""},
    "serve": {
      "host": "127.0.0.1",
      "port": 8080,
      "accounts": "",
      "log": "",
      "snapshot": "",
      "snapshot_every": 100,
      "static_dir": "",
      "assign": "production",
      "round_index": 0
    }
  })");
}

void merge_config(Json& cfg, const Json& layer, std::string_view where) { merge_into(cfg, layer, "", where); }

Json read_config_file(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::exception& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

const Json& get_value(const Json& cfg, std::string_view dotted_key) {
  const Json* node = &cfg;
  for (const auto& part : split_key(dotted_key)) {
    if (!node->is_object() || !node->contains(part))
      fail(ErrorKind::Config, "unknown config key '" + std::string(dotted_key) + "'");
    node = &(*node)[part];
  }
  return *node;
}

void set_value(Json& cfg, std::string_view dotted_key, const Json& value) {
  auto parts = split_key(dotted_key);
  Json layer = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) layer = Json{{*it, layer}};
  merge_config(cfg, layer, "override");
}

void apply_override(Json& cfg, std::string_view assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    fail(ErrorKind::Usage, "override '" + std::string(assignment) + "' is not key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  const Json& current = get_value(cfg, key);
  Json value;
  if (current.is_string()) {
    value = text;
  } else if (current.is_array() && !text.empty() && text.front() != '[') {
    value = Json::array();
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto comma = text.find(',', pos);
      if (comma == std::string::npos) comma = text.size();
      if (comma > pos) value.push_back(text.substr(pos, comma - pos));
      pos = comma + 1;
    }
  } else {
    try {
      value = Json::parse(text);
    } catch (const Json::exception&) {
      fail(ErrorKind::Config, "override '" + key + "': cannot read '" + text + "' as " + current.type_name());
    }
  }
  set_value(cfg, key, value);
}

std::string get_string(const Json& cfg, std::string_view key) { return get_value(cfg, key).get<std::string>(); }
bool get_bool(const Json& cfg, std::string_view key) { return get_value(cfg, key).get<bool>(); }

backend::BackendConfig backend_config(const Json& cfg) {
  const Json& b = get_value(cfg, "backend");
  backend::BackendConfig out;
  out.kind = backend::parse_backend_kind(b["kind"].get<std::string>());
  out.endpoint = b["endpoint"].get<std::string>();
  out.model = b["model"].get<std::string>();
  out.max_new_tokens = b["max_new_tokens"].get<int>();
  out.temperature = b["temperature"].get<double>();
  if (!b["seed"].is_null()) out.seed = b["seed"].get<std::uint64_t>();
  out.timeout_s = b["timeout_s"].get<double>();
  out.max_retries = b["max_retries"].get<int>();
  out.max_concurrency = b["max_concurrency"].get<int>();
  out.retry_backoff_ms = b["retry_backoff_ms"].get<int>();
  out.api_key_env = b["api_key_env"].get<std::string>();
  out.script = b["script"].get<std::string>();
  out.replay_log = b["replay_log"].get<std::string>();
  out.cache_path = b["cache_path"].get<std::string>();
  backend::validate(out);
  return out;
}

parsing::ParseConfig parse_config(const Json& cfg) {
  parsing::ParseConfig out;
  out.min_coverage = get_value(cfg, "parse.min_coverage").get<double>();
  out.min_margin = get_value(cfg, "parse.min_margin").get<double>();
  out.enable_fallback = get_bool(cfg, "parse.fallback") && !get_bool(cfg, "parse.strict");
  if (!(out.min_coverage > 0.0 && out.min_coverage <= 1.0))
    fail(ErrorKind::Config, "parse.min_coverage must be in (0, 1]");
  if (out.min_margin < 0.0) fail(ErrorKind::Config, "parse.min_margin must be non-negative");
  return out;
}

scoring::ScoringConfig scoring_config(const Json& cfg) {
  scoring::ScoringConfig out;
  out.faithfulness = scoring::parse_mode(get_string(cfg, "score.faithfulness_mode"));
  out.alignment = scoring::parse_mode(get_string(cfg, "score.alignment_mode"));
  return out;
}

}  // namespace t2ieval::cli
