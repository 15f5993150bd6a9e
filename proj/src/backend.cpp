// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/backend.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "t2ieval/corpus.hpp"
#include "t2ieval/hashing.hpp"

namespace t2ieval::backend {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Remote: return "remote";
    case BackendKind::Mock: return "mock";
    case BackendKind::Replay: return "replay";
  }
  return "mock";
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "remote") return BackendKind::Remote;
  if (text == "mock") return BackendKind::Mock;
  if (text == "replay") return BackendKind::Replay;
  fail(ErrorKind::Config, "unknown backend kind '" + std::string(text) + "'");
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Error: return "error";
  }
  return "stop";
}

FinishReason parse_finish_reason(std::string_view text) {
  if (text == "stop") return FinishReason::Stop;
  if (text == "length") return FinishReason::Length;
  if (text == "error") return FinishReason::Error;
  fail(ErrorKind::Schema, "unknown finish_reason '" + std::string(text) + "'");
}

void validate(const BackendConfig& cfg) {
  if (cfg.max_new_tokens < 1) fail(ErrorKind::Config, "backend.max_new_tokens must be >= 1");
  if (cfg.max_concurrency < 1) fail(ErrorKind::Config, "backend.max_concurrency must be >= 1");
  if (cfg.max_retries < 0) fail(ErrorKind::Config, "backend.max_retries must be >= 0");
  if (cfg.timeout_s <= 0) fail(ErrorKind::Config, "backend.timeout_s must be positive");
  switch (cfg.kind) {
    case BackendKind::Remote:
      if (cfg.endpoint.empty() || cfg.model.empty())
        fail(ErrorKind::Config, "remote backend requires backend.endpoint and backend.model");
      break;
    case BackendKind::Mock:
      if (cfg.script.empty()) fail(ErrorKind::Config, "mock backend requires backend.script");
      break;
    case BackendKind::Replay:
      if (cfg.replay_log.empty()) fail(ErrorKind::Config, "replay backend requires a replay log");
      break;
  }
}

Json to_json(const BackendConfig& cfg) {
  Json j = {{"kind", to_string(cfg.kind)},
            {"endpoint", cfg.endpoint},
            {"model", cfg.model},
            {"max_new_tokens", cfg.max_new_tokens},
            {"temperature", cfg.temperature},
            {"timeout_s", cfg.timeout_s},
            {"max_retries", cfg.max_retries},
            {"max_concurrency", cfg.max_concurrency},
            {"retry_backoff_ms", cfg.retry_backoff_ms},
            {"api_key_env", cfg.api_key_env},
            {"script", cfg.script.string()},
            {"replay_log", cfg.replay_log.string()},
            {"cache_path", cfg.cache_path.string()}};
  j["seed"] = cfg.seed ? Json(*cfg.seed) : Json(nullptr);
  return j;
}

std::string image_digest(std::string_view image_ref) {
  if (corpus::is_remote_uri(image_ref)) return sha256_hex(image_ref);
  std::error_code ec;
  if (image_ref.empty() || !std::filesystem::is_regular_file(std::string(image_ref), ec))
    fail(ErrorKind::ImageUnreadable, "image not readable: '" + std::string(image_ref) + "'");
  try {
    return sha256_file(std::string(image_ref));
  } catch (const Error& e) {
    fail(ErrorKind::ImageUnreadable, e.what());
  }
}

std::string request_hash(std::string_view model, const protocol::RenderedInstruction& instr,
                         std::string_view image_digest) {
  std::string key;
  key.append(model).push_back('\0');
  key.append(instr.question_id).push_back('\0');
  key.append(instr.final_text).push_back('\0');
  key.append(image_digest);
  return sha256_hex(key);
}

MockBackend::MockBackend(std::string model, int max_new_tokens,
                         std::map<std::pair<std::string, std::string>, Entry> script, int delay_ms)
    : model_(std::move(model)), max_new_tokens_(max_new_tokens), script_(std::move(script)), delay_ms_(delay_ms) {}

std::map<std::pair<std::string, std::string>, MockBackend::Entry> MockBackend::load_script(
    const std::filesystem::path& path) {
  std::map<std::pair<std::string, std::string>, Entry> out;
  for (const auto& rec : read_jsonl(path)) {
    Entry e;
    e.response = require_string(rec.value, "response", rec.line);
    if (rec.value.contains("finish_reason"))
      e.finish_reason = parse_finish_reason(require_string(rec.value, "finish_reason", rec.line));
    std::string sample = rec.value.contains("sample_id") ? require_string(rec.value, "sample_id", rec.line) : "*";
    std::string question = require_string(rec.value, "question_id", rec.line);
    out[{sample, question}] = std::move(e);
  }
  return out;
}

InferenceResponse MockBackend::infer(const protocol::RenderedInstruction& instr) {
  int now = ++in_flight_;
  int prev = max_in_flight_.load();
  while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
  }
  struct Leave {
    std::atomic<int>& n;
    ~Leave() { --n; }
  } leave{in_flight_};
  ++calls_;

  InferenceResponse r;
  r.sample_id = instr.sample_id;
  r.question_id = instr.question_id;
  r.request_hash = request_hash(model_, instr, image_digest(instr.image_ref));
  if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));

  auto it = script_.find({instr.sample_id, instr.question_id});
  if (it == script_.end()) it = script_.find({"*", instr.question_id});
  if (it == script_.end())
    fail(ErrorKind::BackendRefused, "mock script has no response for " + instr.sample_id + "/" + instr.question_id);
  r.raw_text = it->second.response;
  r.finish_reason = it->second.finish_reason;
  if (r.finish_reason == FinishReason::Error)
    fail(ErrorKind::BackendRefused, "scripted failure for " + instr.sample_id + "/" + instr.question_id);

  // Whitespace tokens stand in for model tokens.
  std::istringstream in(r.raw_text);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  if (static_cast<int>(tokens.size()) > max_new_tokens_) {
    std::string cut;
    for (int i = 0; i < max_new_tokens_; ++i) cut += (i ? " " : "") + tokens[static_cast<std::size_t>(i)];
    r.raw_text = cut;
    r.finish_reason = FinishReason::Length;
  }
  return r;
}

Json to_json(const ReplayEntry& e) {
  return {{"request_hash", e.request_hash},
          {"sample_id", e.sample_id},
          {"question_id", e.question_id},
          {"response", e.response},
          {"finish_reason", to_string(e.finish_reason)}};
}

ReplayEntry replay_entry_from_json(const Json& j, std::size_t line) {
  ReplayEntry e;
  e.request_hash = require_string(j, "request_hash", line);
  e.response = require_string(j, "response", line);
  e.finish_reason = parse_finish_reason(require_string(j, "finish_reason", line));
  if (j.contains("sample_id")) e.sample_id = require_string(j, "sample_id", line);
  if (j.contains("question_id")) e.question_id = require_string(j, "question_id", line);
  return e;
}

std::vector<ReplayEntry> read_replay_log(const std::filesystem::path& path) {
  std::vector<ReplayEntry> out;
  for (const auto& rec : read_jsonl(path)) out.push_back(replay_entry_from_json(rec.value, rec.line));
  return out;
}

std::vector<ReplayEntry> replay_entries(std::span<const InferenceResponse> responses) {
  std::vector<ReplayEntry> out;
  for (const auto& r : responses) {
    if (r.finish_reason == FinishReason::Error || r.request_hash.empty()) continue;
    out.push_back({r.request_hash, r.sample_id, r.question_id, r.raw_text, r.finish_reason});
  }
  return out;
}

ReplayBackend::ReplayBackend(std::string model, std::vector<ReplayEntry> entries) : model_(std::move(model)) {
  for (auto& e : entries) entries_[e.request_hash] = std::move(e);
}

InferenceResponse ReplayBackend::infer(const protocol::RenderedInstruction& instr) {
  InferenceResponse r;
  r.sample_id = instr.sample_id;
  r.question_id = instr.question_id;
  r.request_hash = request_hash(model_, instr, image_digest(instr.image_ref));
  auto it = entries_.find(r.request_hash);
  if (it == entries_.end())
    fail(ErrorKind::ReplayMiss, "no recorded response for " + instr.sample_id + "/" + instr.question_id +
                                    " (hash " + r.request_hash + ")");
  r.raw_text = it->second.response;
  r.finish_reason = it->second.finish_reason;
  return r;
}

CachingBackend::CachingBackend(std::unique_ptr<Backend> inner, std::string model, std::filesystem::path path)
    : inner_(std::move(inner)), model_(std::move(model)), path_(std::move(path)) {
  std::error_code ec;
  if (std::filesystem::exists(path_, ec))
    for (auto& e : read_replay_log(path_)) entries_[e.request_hash] = std::move(e);
}

InferenceResponse CachingBackend::infer(const protocol::RenderedInstruction& instr) {
  std::string hash = request_hash(model_, instr, image_digest(instr.image_ref));
  {
    std::lock_guard lock(mu_);
    if (auto it = entries_.find(hash); it != entries_.end()) {
      ++hits_;
      InferenceResponse r;
      r.sample_id = instr.sample_id;
      r.question_id = instr.question_id;
      r.request_hash = hash;
      r.raw_text = it->second.response;
      r.finish_reason = it->second.finish_reason;
      return r;
    }
  }
  InferenceResponse r = inner_->infer(instr);
  r.request_hash = hash;
  if (r.finish_reason != FinishReason::Error) {
    std::lock_guard lock(mu_);
    ReplayEntry e{hash, r.sample_id, r.question_id, r.raw_text, r.finish_reason};
    if (entries_.emplace(hash, e).second) {
      if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
      std::ofstream out(path_, std::ios::app | std::ios::binary);
      out << dump_line(to_json(e)) << '\n';
    }
  }
  return r;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  validate(cfg);
  std::unique_ptr<Backend> b;
  switch (cfg.kind) {
    case BackendKind::Mock:
      b = std::make_unique<MockBackend>(cfg.model, cfg.max_new_tokens, MockBackend::load_script(cfg.script));
      break;
    case BackendKind::Remote:
      b = std::make_unique<RemoteBackend>(cfg);
      break;
    case BackendKind::Replay:
      return std::make_unique<ReplayBackend>(cfg.model, read_replay_log(cfg.replay_log));
  }
  if (!cfg.cache_path.empty()) b = std::make_unique<CachingBackend>(std::move(b), cfg.model, cfg.cache_path);
  return b;
}

std::vector<InferenceResponse> infer_batch(Backend& backend, std::span<const protocol::RenderedInstruction> instrs,
                                           int max_concurrency) {
  std::vector<InferenceResponse> out(instrs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < instrs.size();) {
      const auto& instr = instrs[i];
      auto start = std::chrono::steady_clock::now();
      try {
        out[i] = backend.infer(instr);
      } catch (const Error& e) {
        out[i] = {};
        out[i].sample_id = instr.sample_id;
        out[i].question_id = instr.question_id;
        out[i].finish_reason = FinishReason::Error;
        out[i].error_kind = e.kind();
        out[i].error = e.what();
      } catch (const std::exception& e) {
        out[i] = {};
        out[i].sample_id = instr.sample_id;
        out[i].question_id = instr.question_id;
        out[i].finish_reason = FinishReason::Error;
        out[i].error_kind = ErrorKind::Internal;
        out[i].error = e.what();
      }
      out[i].latency_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
  };
  std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, max_concurrency)), instrs.size());
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace t2ieval::backend
