// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "t2ieval/errors.hpp"
#include "t2ieval/jsonl.hpp"
#include "t2ieval/protocol.hpp"

namespace t2ieval::backend {

enum class BackendKind { Remote, Mock, Replay };
enum class FinishReason { Stop, Length, Error };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);
std::string_view to_string(FinishReason reason);
FinishReason parse_finish_reason(std::string_view text);

struct BackendConfig {
  BackendKind kind = BackendKind::Mock;
  std::string endpoint;  // e.g. http://127.0.0.1:8000/v1
  std::string model = "mock";
  int max_new_tokens = 32;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
  double timeout_s = 60.0;
  int max_retries = 3;
  int max_concurrency = 4;
  int retry_backoff_ms = 200;  // first retry delay, doubled each attempt
  std::string api_key_env = "T2IEVAL_API_KEY";
  std::filesystem::path script;      // Mock
  std::filesystem::path replay_log;  // Replay
  std::filesystem::path cache_path;  // empty: no response cache
};

// Throws Error(Config).
void validate(const BackendConfig& cfg);
Json to_json(const BackendConfig& cfg);

struct InferenceResponse {
  std::string sample_id;
  std::string question_id;
  std::string raw_text;
  FinishReason finish_reason = FinishReason::Stop;
  double latency_ms = 0.0;
  std::string request_hash;
  // Set when finish_reason is Error.
  std::optional<ErrorKind> error_kind;
  std::string error;
};

// Content digest of the image behind image_ref: file bytes for local paths,
// the locator itself for URLs. Throws Error(ImageUnreadable).
std::string image_digest(std::string_view image_ref);

// Cache and replay key: sha256 over model, question id, instruction text and
// image digest.
std::string request_hash(std::string_view model, const protocol::RenderedInstruction& instr,
                         std::string_view image_digest);

class Backend {
 public:
  virtual ~Backend() = default;
  // Throws Error on failure (Transport, BackendRefused, ImageUnreadable, ReplayMiss).
  virtual InferenceResponse infer(const protocol::RenderedInstruction& instr) = 0;
};

// Scripted responses keyed by (sample_id, question_id); "*" matches any
// sample. Script file: one {"sample_id","question_id","response"} per line.
class MockBackend : public Backend {
 public:
  struct Entry {
    std::string response;
    FinishReason finish_reason = FinishReason::Stop;
  };

  MockBackend(std::string model, int max_new_tokens, std::map<std::pair<std::string, std::string>, Entry> script,
              int delay_ms = 0);
  static std::map<std::pair<std::string, std::string>, Entry> load_script(const std::filesystem::path& path);

  InferenceResponse infer(const protocol::RenderedInstruction& instr) override;

  int max_in_flight() const { return max_in_flight_.load(); }
  int calls() const { return calls_.load(); }

 private:
  std::string model_;
  int max_new_tokens_;
  std::map<std::pair<std::string, std::string>, Entry> script_;
  int delay_ms_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<int> calls_{0};
};

// OpenAI-compatible chat completion client.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(BackendConfig cfg);
  InferenceResponse infer(const protocol::RenderedInstruction& instr) override;

  // Request body for one instruction; the image part carries `image_url`
  // (a data URL for local files).
  Json request_body(const protocol::RenderedInstruction& instr, const std::string& image_url) const;
  int attempts() const { return attempts_.load(); }

 private:
  BackendConfig cfg_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::atomic<int> attempts_{0};
};

struct ReplayEntry {
  std::string request_hash;
  std::string sample_id;
  std::string question_id;
  std::string response;
  FinishReason finish_reason = FinishReason::Stop;
};

Json to_json(const ReplayEntry& e);
ReplayEntry replay_entry_from_json(const Json& j, std::size_t line = 0);
std::vector<ReplayEntry> read_replay_log(const std::filesystem::path& path);
// Error responses are not recorded.
std::vector<ReplayEntry> replay_entries(std::span<const InferenceResponse> responses);

// Serves recorded responses by request hash; never touches the network.
class ReplayBackend : public Backend {
 public:
  ReplayBackend(std::string model, std::vector<ReplayEntry> entries);
  InferenceResponse infer(const protocol::RenderedInstruction& instr) override;

 private:
  std::string model_;
  std::map<std::string, ReplayEntry> entries_;
};

// Response cache in front of another backend, persisted as a replay log.
class CachingBackend : public Backend {
 public:
  CachingBackend(std::unique_ptr<Backend> inner, std::string model, std::filesystem::path path);
  InferenceResponse infer(const protocol::RenderedInstruction& instr) override;
  int hits() const { return hits_.load(); }

 private:
  std::unique_ptr<Backend> inner_;
  std::string model_;
  std::filesystem::path path_;
  std::mutex mu_;
  std::map<std::string, ReplayEntry> entries_;
  std::atomic<int> hits_{0};
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

// Runs instructions with at most max_concurrency in flight. Output order
// follows input order; failures land in their slot as FinishReason::Error.
std::vector<InferenceResponse> infer_batch(Backend& backend, std::span<const protocol::RenderedInstruction> instrs,
                                           int max_concurrency);

}  // namespace t2ieval::backend
