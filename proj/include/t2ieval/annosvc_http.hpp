// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "t2ieval/annosvc.hpp"
#include "t2ieval/errors.hpp"

namespace t2ieval::annosvc {

struct HttpOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> static_dir;  // served at "/"
  std::string version;
};

// HTTP status for an error class.
int http_status(ErrorKind kind);

// What the annotation view needs for one sample: prompt, image URL, the
// applicable questions with their full option sentences in protocol order,
// and the caller's saved answers.
Json sample_payload(const AnnotationService& svc, const SampleRecord& sample,
                    const std::optional<AssignmentEntry>& entry);

// JSON API under /api, bearer-token authenticated except /api/health and
// /api/login.
class HttpServer {
 public:
  HttpServer(AnnotationService& service, HttpOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and serves on a background thread. Returns the bound port.
  int start();
  // Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace t2ieval::annosvc
