// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "t2ieval/jsonl.hpp"
#include "t2ieval/rational.hpp"
#include "t2ieval/scoring.hpp"
#include "t2ieval/stats.hpp"

namespace t2ieval::report {

// Column-oriented metric table keyed by generator_id. Cells hold exact
// values; empty CSV cells are absent.
class MetricTable {
 public:
  MetricTable() = default;
  explicit MetricTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::string>& ids() const { return ids_; }

  bool has_column(std::string_view name) const;
  std::size_t column_index(std::string_view name) const;  // throws ColumnMismatch
  void add_row(std::string id, std::vector<std::optional<Rational>> values);
  const std::vector<std::optional<Rational>>& row(std::size_t i) const { return rows_[i]; }
  std::optional<Rational> value(std::string_view id, std::string_view column) const;
  std::vector<std::optional<Rational>> column(std::string_view name) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> ids_;
  std::vector<std::vector<std::optional<Rational>>> rows_;
};

// First column must be generator_id. Throws Schema or ColumnMismatch.
MetricTable parse_metric_csv(std::string_view text, std::string_view origin = "csv");
MetricTable read_metric_csv(const std::filesystem::path& path);
std::string metric_csv(const MetricTable& table);

MetricTable from_reports(std::span<const scoring::ScoreReport> reports);
// Joins on generator_id. Ids present on one side only, or duplicated column
// names, throw Error(ColumnMismatch).
MetricTable merge(const MetricTable& a, const MetricTable& b);

struct LeaderboardOptions {
  std::string human_column = "human";
  std::string fallback_sort = "evalalign_f";
  std::set<std::string> lower_is_better;  // e.g. "fid"
};

struct LeaderboardRow {
  std::string generator_id;
  std::map<std::string, Rational> values;
  std::map<std::string, int> ranks;
  std::set<std::string> tied;  // metrics whose rank here was decided by id
};

struct Leaderboard {
  std::vector<std::string> metrics;  // non-empty columns, table order
  std::string sort_metric;
  std::vector<LeaderboardRow> rows;
};

Leaderboard build_leaderboard(const MetricTable& table, const LeaderboardOptions& opts = {});
Leaderboard build_leaderboard(std::span<const scoring::ScoreReport> reports,
                              const std::optional<MetricTable>& external, const LeaderboardOptions& opts = {});
MetricTable to_table(const Leaderboard& lb);

enum class Format { Markdown, Csv, Json };
Format parse_format(std::string_view text);

struct RenderOptions {
  bool intensity = false;  // Markdown: add the sort metric scaled to [0, 1]
  int decimals = 4;
};

std::string render(const Leaderboard& lb, Format format, const RenderOptions& opts = {});

// Values printed in a publication, for discrepancy flags.
struct ReportedValues {
  std::optional<double> kendall;
  std::optional<double> pearson;
  std::optional<double> mae;
};

// CSV with columns metric,kendall,pearson,mae (cells may be empty).
std::map<std::string, ReportedValues> read_reported(const std::filesystem::path& path);
std::map<std::string, ReportedValues> parse_reported(std::string_view text, std::string_view origin = "reported");

struct CorrelationOptions {
  double tolerance = 0.01;
  std::size_t bootstrap_iterations = 0;  // 0 disables
  std::uint64_t seed = 0;
};

struct CorrelationRow {
  std::string metric;
  std::size_t n = 0;
  std::size_t dropped = 0;  // rows with a missing value in either column
  stats::PairCounts pairs;
  double tau_a = 0.0;
  double tau_b = 0.0;
  double pearson = 0.0;
  double pearson_rank = 0.0;
  stats::MaeResult mae;
  std::optional<stats::BootstrapCi> tau_b_ci;
  std::optional<stats::BootstrapCi> pearson_ci;
  std::optional<ReportedValues> reported;
  std::string kendall_match;  // "tau_b", "tau_a" or "none" when a Kendall value is reported
  std::string pearson_match;  // "pearson", "pearson_rank" or "none"
  bool mae_discrepancy = false;
  bool kendall_discrepancy = false;
  bool pearson_discrepancy = false;
};

struct CorrelationReport {
  std::string human_column;
  double tolerance = 0.01;
  std::vector<CorrelationRow> rows;
};

CorrelationReport correlation_report(const MetricTable& table, std::string_view human_column,
                                     const std::vector<std::string>& metric_columns,
                                     const std::map<std::string, ReportedValues>& reported = {},
                                     const CorrelationOptions& opts = {});

std::string correlation_csv(const CorrelationReport& r);
Json to_json(const CorrelationReport& r);
std::string correlation_markdown(const CorrelationReport& r);

}  // namespace t2ieval::report
