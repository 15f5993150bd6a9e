// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/errors.hpp"

namespace t2ieval {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Internal: return "Internal";
    case ErrorKind::Usage: return "Usage";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Schema: return "SchemaError";
    case ErrorKind::Integrity: return "IntegrityError";
    case ErrorKind::InsufficientPrompts: return "InsufficientPrompts";
    case ErrorKind::MissingAttribute: return "MissingAttribute";
    case ErrorKind::DanglingReference: return "DanglingReference";
    case ErrorKind::Transport: return "TransportError";
    case ErrorKind::BackendRefused: return "BackendRefused";
    case ErrorKind::ImageUnreadable: return "ImageUnreadable";
    case ErrorKind::ReplayMiss: return "ReplayMiss";
    case ErrorKind::Unparseable: return "Unparseable";
    case ErrorKind::AmbiguousMatch: return "AmbiguousMatch";
    case ErrorKind::MixedTask: return "MixedTask";
    case ErrorKind::NoData: return "NoData";
    case ErrorKind::DegenerateSeries: return "DegenerateSeries";
    case ErrorKind::DegenerateAgreement: return "DegenerateAgreement";
    case ErrorKind::ColumnMismatch: return "ColumnMismatch";
    case ErrorKind::IllegalTransition: return "IllegalTransition";
    case ErrorKind::IncompleteRound: return "IncompleteRound";
    case ErrorKind::Unauthorized: return "Unauthorized";
    case ErrorKind::Forbidden: return "Forbidden";
    case ErrorKind::NotFound: return "NotFound";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Internal: return 1;
    case ErrorKind::Usage: return 2;
    case ErrorKind::Config: return 3;
    case ErrorKind::Io: return 4;
    case ErrorKind::Schema: return 5;
    case ErrorKind::Integrity: return 6;
    case ErrorKind::InsufficientPrompts: return 7;
    case ErrorKind::MissingAttribute: return 8;
    case ErrorKind::DanglingReference: return 9;
    case ErrorKind::Transport: return 10;
    case ErrorKind::BackendRefused: return 11;
    case ErrorKind::ImageUnreadable: return 12;
    case ErrorKind::ReplayMiss: return 13;
    case ErrorKind::Unparseable: return 14;
    case ErrorKind::AmbiguousMatch: return 15;
    case ErrorKind::MixedTask: return 16;
    case ErrorKind::NoData: return 17;
    case ErrorKind::DegenerateSeries: return 18;
    case ErrorKind::DegenerateAgreement: return 19;
    case ErrorKind::ColumnMismatch: return 20;
    case ErrorKind::IllegalTransition: return 21;
    case ErrorKind::IncompleteRound: return 22;
    case ErrorKind::Unauthorized: return 23;
    case ErrorKind::Forbidden: return 24;
    case ErrorKind::NotFound: return 25;
  }
  return 1;
}

}  // namespace t2ieval
