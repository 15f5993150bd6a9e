// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace t2ieval {

// Every failure the harness reports is one of these classes. The CLI maps
// each class to a fixed process exit code (see exit_code()).
enum class ErrorKind {
  Internal,
  Usage,
  Config,
  Io,
  Schema,
  Integrity,
  InsufficientPrompts,
  MissingAttribute,
  DanglingReference,
  Transport,
  BackendRefused,
  ImageUnreadable,
  ReplayMiss,
  Unparseable,
  AmbiguousMatch,
  MixedTask,
  NoData,
  DegenerateSeries,
  DegenerateAgreement,
  ColumnMismatch,
  IllegalTransition,
  IncompleteRound,
  Unauthorized,
  Forbidden,
  NotFound,
};

std::string_view to_string(ErrorKind kind);
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace t2ieval
