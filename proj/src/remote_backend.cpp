// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "t2ieval/backend.hpp"
#include "t2ieval/corpus.hpp"
#include "t2ieval/hashing.hpp"

namespace t2ieval::backend {

namespace {

std::string mime_for(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  if (ext == ".bmp") return "image/bmp";
  return "application/octet-stream";
}

std::string image_url_for(std::string_view image_ref) {
  if (corpus::is_remote_uri(image_ref)) return std::string(image_ref);
  std::filesystem::path p{std::string(image_ref)};
  std::string bytes;
  try {
    bytes = read_text(p);
  } catch (const Error& e) {
    fail(ErrorKind::ImageUnreadable, e.what());
  }
  return "data:" + mime_for(p) + ";base64," + base64_encode(bytes);
}

bool retryable(int status) { return status == 408 || status == 429 || status >= 500; }

std::string content_text(const Json& content) {
  if (content.is_string()) return content.get<std::string>();
  std::string out;
  if (content.is_array())
    for (const auto& part : content)
      if (part.is_object() && part.value("type", "") == "text") out += part.value("text", "");
  return out;
}

}  // namespace

RemoteBackend::RemoteBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  const std::string& ep = cfg_.endpoint;
  auto scheme = ep.find("://");
  if (scheme == std::string::npos) fail(ErrorKind::Config, "backend.endpoint must include a scheme: '" + ep + "'");
  auto slash = ep.find('/', scheme + 3);
  scheme_host_port_ = ep.substr(0, slash);
  path_prefix_ = slash == std::string::npos ? "" : ep.substr(slash);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

Json RemoteBackend::request_body(const protocol::RenderedInstruction& instr, const std::string& image_url) const {
  Json content = Json::array();
  content.push_back({{"type", "image_url"}, {"image_url", {{"url", image_url}}}});
  content.push_back({{"type", "text"}, {"text", instr.final_text}});
  Json body = {{"model", cfg_.model},
               {"messages", Json::array({{{"role", "user"}, {"content", content}}})},
               {"max_tokens", cfg_.max_new_tokens},
               {"temperature", cfg_.temperature}};
  if (cfg_.seed) body["seed"] = *cfg_.seed;
  return body;
}

InferenceResponse RemoteBackend::infer(const protocol::RenderedInstruction& instr) {
  InferenceResponse r;
  r.sample_id = instr.sample_id;
  r.question_id = instr.question_id;
  r.request_hash = request_hash(cfg_.model, instr, image_digest(instr.image_ref));
  const std::string body = request_body(instr, image_url_for(instr.image_ref)).dump();

  httplib::Client client(scheme_host_port_);
  auto timeout = std::chrono::milliseconds(static_cast<long long>(cfg_.timeout_s * 1000));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!cfg_.api_key_env.empty())
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);

  std::string last_error;
  int backoff = cfg_.retry_backoff_ms;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
    ++attempts_;
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      if (retryable(res->status)) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
        continue;
      }
      fail(ErrorKind::BackendRefused, "HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    Json reply;
    try {
      reply = Json::parse(res->body);
    } catch (const Json::parse_error& e) {
      fail(ErrorKind::BackendRefused, std::string("malformed completion: ") + e.what() + ": " + res->body);
    }
    if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty())
      fail(ErrorKind::BackendRefused, "completion without choices: " + res->body);
    const Json& choice = reply["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content"))
      r.raw_text = content_text(choice["message"]["content"]);
    std::string reason = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                             ? choice["finish_reason"].get<std::string>()
                             : "stop";
    r.finish_reason = reason == "length" ? FinishReason::Length : FinishReason::Stop;
    return r;
  }
  fail(ErrorKind::Transport, "request to " + cfg_.endpoint + " failed after " + std::to_string(cfg_.max_retries + 1) +
                                 " attempts: " + last_error);
}

}  // namespace t2ieval::backend
