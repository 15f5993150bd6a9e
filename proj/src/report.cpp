// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/report.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "t2ieval/errors.hpp"

namespace t2ieval::report {

namespace {

std::vector<std::string> split_csv_line(std::string_view line, std::string_view origin, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) fail(ErrorKind::Schema, std::string(origin) + ":" + std::to_string(line_no) + ": unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

template <typename F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    f(line, line_no);
  }
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

bool MetricTable::has_column(std::string_view name) const {
  return std::find(columns_.begin(), columns_.end(), name) != columns_.end();
}

std::size_t MetricTable::column_index(std::string_view name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) fail(ErrorKind::ColumnMismatch, "no metric column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - columns_.begin());
}

void MetricTable::add_row(std::string id, std::vector<std::optional<Rational>> values) {
  if (values.size() != columns_.size())
    fail(ErrorKind::ColumnMismatch, "row '" + id + "' has " + std::to_string(values.size()) + " values for " +
                                        std::to_string(columns_.size()) + " columns");
  if (std::find(ids_.begin(), ids_.end(), id) != ids_.end())
    fail(ErrorKind::ColumnMismatch, "duplicate generator_id '" + id + "'");
  ids_.push_back(std::move(id));
  rows_.push_back(std::move(values));
}

std::optional<Rational> MetricTable::value(std::string_view id, std::string_view column) const {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) fail(ErrorKind::ColumnMismatch, "no row '" + std::string(id) + "'");
  return rows_[static_cast<std::size_t>(it - ids_.begin())][column_index(column)];
}

std::vector<std::optional<Rational>> MetricTable::column(std::string_view name) const {
  std::size_t c = column_index(name);
  std::vector<std::optional<Rational>> out;
  for (const auto& r : rows_) out.push_back(r[c]);
  return out;
}

MetricTable parse_metric_csv(std::string_view text, std::string_view origin) {
  std::optional<MetricTable> table;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    auto fields = split_csv_line(line, origin, line_no);
    for (auto& f : fields) f = trim(f);
    if (!table) {
      if (fields.empty() || fields.front() != "generator_id")
        fail(ErrorKind::Schema, std::string(origin) + ":" + std::to_string(line_no) +
                                    ": first column must be generator_id");
      std::vector<std::string> cols(fields.begin() + 1, fields.end());
      std::set<std::string> seen;
      for (const auto& c : cols)
        if (c.empty() || !seen.insert(c).second)
          fail(ErrorKind::ColumnMismatch, std::string(origin) + ": empty or duplicate column name '" + c + "'");
      table.emplace(std::move(cols));
      return;
    }
    if (fields.size() != table->columns().size() + 1)
      fail(ErrorKind::ColumnMismatch, std::string(origin) + ":" + std::to_string(line_no) + ": expected " +
                                          std::to_string(table->columns().size() + 1) + " fields, got " +
                                          std::to_string(fields.size()));
    std::vector<std::optional<Rational>> values;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i].empty()) {
        values.emplace_back();
        continue;
      }
      auto r = Rational::try_parse(fields[i]);
      if (!r)
        fail(ErrorKind::Schema, std::string(origin) + ":" + std::to_string(line_no) + ": not a number: '" +
                                    fields[i] + "'");
      values.push_back(*r);
    }
    table->add_row(fields.front(), std::move(values));
  });
  if (!table) fail(ErrorKind::Schema, std::string(origin) + ": empty CSV");
  return *table;
}

MetricTable read_metric_csv(const std::filesystem::path& path) {
  return parse_metric_csv(read_text(path), path.string());
}

std::string metric_csv(const MetricTable& table) {
  std::string out = "generator_id";
  for (const auto& c : table.columns()) out += "," + csv_field(c);
  out += "\n";
  for (std::size_t i = 0; i < table.ids().size(); ++i) {
    out += csv_field(table.ids()[i]);
    for (const auto& v : table.row(i)) out += "," + (v ? v->to_exact_string() : std::string());
    out += "\n";
  }
  return out;
}

MetricTable from_reports(std::span<const scoring::ScoreReport> reports) {
  std::vector<std::string> cols = {"evalalign_f", "evalalign_a"};
  std::set<std::string> cats;
  for (const auto& r : reports)
    for (const auto& [qid, v] : r.per_category) cats.insert(qid);
  cols.insert(cols.end(), cats.begin(), cats.end());
  MetricTable t(cols);
  for (const auto& r : reports) {
    std::vector<std::optional<Rational>> values = {r.evalalign_f, r.evalalign_a};
    for (const auto& c : cats) {
      auto it = r.per_category.find(c);
      values.push_back(it == r.per_category.end() ? std::nullopt : std::optional<Rational>(it->second));
    }
    t.add_row(r.generator_id, std::move(values));
  }
  return t;
}

MetricTable merge(const MetricTable& a, const MetricTable& b) {
  for (const auto& c : b.columns())
    if (a.has_column(c)) fail(ErrorKind::ColumnMismatch, "column '" + c + "' present in both tables");
  std::set<std::string> ida(a.ids().begin(), a.ids().end()), idb(b.ids().begin(), b.ids().end());
  std::vector<std::string> unmatched;
  std::set_symmetric_difference(ida.begin(), ida.end(), idb.begin(), idb.end(), std::back_inserter(unmatched));
  if (!unmatched.empty()) {
    std::string list;
    for (const auto& id : unmatched) list += (list.empty() ? "" : ", ") + id;
    fail(ErrorKind::ColumnMismatch, "generator ids without a match: " + list);
  }
  std::vector<std::string> cols = a.columns();
  cols.insert(cols.end(), b.columns().begin(), b.columns().end());
  MetricTable out(cols);
  for (std::size_t i = 0; i < a.ids().size(); ++i) {
    auto values = a.row(i);
    const auto& id = a.ids()[i];
    std::size_t j = static_cast<std::size_t>(std::find(b.ids().begin(), b.ids().end(), id) - b.ids().begin());
    values.insert(values.end(), b.row(j).begin(), b.row(j).end());
    out.add_row(id, std::move(values));
  }
  return out;
}

Leaderboard build_leaderboard(const MetricTable& table, const LeaderboardOptions& opts) {
  if (table.ids().empty()) fail(ErrorKind::NoData, "leaderboard needs at least one model");
  Leaderboard lb;
  std::vector<LeaderboardRow> rows(table.ids().size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].generator_id = table.ids()[i];

  for (std::size_t c = 0; c < table.columns().size(); ++c) {
    const std::string& metric = table.columns()[c];
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (table.row(i)[c]) present.push_back(i);
    if (present.empty()) continue;
    lb.metrics.push_back(metric);
    const bool ascending = opts.lower_is_better.count(metric) > 0;
    std::sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
      const Rational& va = *table.row(a)[c];
      const Rational& vb = *table.row(b)[c];
      if (va != vb) return ascending ? va < vb : va > vb;
      return rows[a].generator_id < rows[b].generator_id;
    });
    for (std::size_t k = 0; k < present.size(); ++k) {
      auto& row = rows[present[k]];
      row.values[metric] = *table.row(present[k])[c];
      row.ranks[metric] = static_cast<int>(k + 1);
      bool tie_prev = k > 0 && *table.row(present[k - 1])[c] == *table.row(present[k])[c];
      bool tie_next = k + 1 < present.size() && *table.row(present[k + 1])[c] == *table.row(present[k])[c];
      if (tie_prev || tie_next) row.tied.insert(metric);
    }
  }

  auto has = [&](const std::string& m) { return std::find(lb.metrics.begin(), lb.metrics.end(), m) != lb.metrics.end(); };
  if (has(opts.human_column))
    lb.sort_metric = opts.human_column;
  else if (has(opts.fallback_sort))
    lb.sort_metric = opts.fallback_sort;
  else if (!lb.metrics.empty())
    lb.sort_metric = lb.metrics.front();

  if (!lb.sort_metric.empty()) {
    std::stable_sort(rows.begin(), rows.end(), [&](const LeaderboardRow& a, const LeaderboardRow& b) {
      auto ra = a.ranks.find(lb.sort_metric), rb = b.ranks.find(lb.sort_metric);
      if ((ra == a.ranks.end()) != (rb == b.ranks.end())) return rb == b.ranks.end();
      if (ra == a.ranks.end()) return a.generator_id < b.generator_id;
      return ra->second < rb->second;
    });
  }
  lb.rows = std::move(rows);
  return lb;
}

Leaderboard build_leaderboard(std::span<const scoring::ScoreReport> reports,
                              const std::optional<MetricTable>& external, const LeaderboardOptions& opts) {
  MetricTable t = from_reports(reports);
  if (external) t = merge(t, *external);
  return build_leaderboard(t, opts);
}

MetricTable to_table(const Leaderboard& lb) {
  MetricTable t(lb.metrics);
  for (const auto& row : lb.rows) {
    std::vector<std::optional<Rational>> values;
    for (const auto& m : lb.metrics) {
      auto it = row.values.find(m);
      values.push_back(it == row.values.end() ? std::nullopt : std::optional<Rational>(it->second));
    }
    t.add_row(row.generator_id, std::move(values));
  }
  return t;
}

Format parse_format(std::string_view text) {
  if (text == "markdown" || text == "md") return Format::Markdown;
  if (text == "csv") return Format::Csv;
  if (text == "json") return Format::Json;
  fail(ErrorKind::Usage, "unknown format '" + std::string(text) + "'");
}

std::string render(const Leaderboard& lb, Format format, const RenderOptions& opts) {
  if (lb.rows.empty()) fail(ErrorKind::NoData, "cannot render an empty leaderboard");
  switch (format) {
    case Format::Csv:
      return metric_csv(to_table(lb));
    case Format::Json: {
      Json rows = Json::array();
      for (const auto& row : lb.rows) {
        Json values = Json::object(), ranks = Json::object();
        for (const auto& [m, v] : row.values) values[m] = v.to_exact_string();
        for (const auto& [m, r] : row.ranks) ranks[m] = r;
        rows.push_back({{"generator_id", row.generator_id},
                        {"values", values},
                        {"ranks", ranks},
                        {"tied", std::vector<std::string>(row.tied.begin(), row.tied.end())}});
      }
      Json doc = {{"metrics", lb.metrics}, {"sort_metric", lb.sort_metric}, {"rows", rows}};
      return doc.dump(2) + "\n";
    }
    case Format::Markdown: {
      std::optional<Rational> lo, hi;
      if (opts.intensity && !lb.sort_metric.empty()) {
        for (const auto& row : lb.rows) {
          auto it = row.values.find(lb.sort_metric);
          if (it == row.values.end()) continue;
          if (!lo || it->second < *lo) lo = it->second;
          if (!hi || it->second > *hi) hi = it->second;
        }
      }
      std::ostringstream md;
      md << "| Model |";
      for (const auto& m : lb.metrics) md << ' ' << m << " |";
      if (lo) md << " intensity |";
      md << "\n|---|";
      for (std::size_t i = 0; i < lb.metrics.size(); ++i) md << "---:|";
      if (lo) md << "---:|";
      md << "\n";
      bool any_tie = false;
      for (const auto& row : lb.rows) {
        md << "| " << row.generator_id << " |";
        for (const auto& m : lb.metrics) {
          auto it = row.values.find(m);
          if (it == row.values.end()) {
            md << "  |";
            continue;
          }
          bool tie = row.tied.count(m) > 0;
          any_tie = any_tie || tie;
          md << ' ' << it->second.to_decimal(opts.decimals) << "<sup>" << row.ranks.at(m) << (tie ? "*" : "")
             << "</sup> |";
        }
        if (lo) {
          auto it = row.values.find(lb.sort_metric);
          if (it == row.values.end() || *hi == *lo)
            md << "  |";
          else
            md << ' ' << ((it->second - *lo) / (*hi - *lo)).to_decimal(2) << " |";
        }
        md << "\n";
      }
      if (any_tie) md << "\n\\* tied value; rank decided by generator_id.\n";
      return md.str();
    }
  }
  return {};
}

std::map<std::string, ReportedValues> parse_reported(std::string_view text, std::string_view origin) {
  std::map<std::string, ReportedValues> out;
  std::vector<std::string> header;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    auto fields = split_csv_line(line, origin, line_no);
    for (auto& f : fields) f = trim(f);
    if (header.empty()) {
      header = fields;
      if (header.front() != "metric")
        fail(ErrorKind::Schema, std::string(origin) + ": first column must be metric");
      return;
    }
    if (fields.size() != header.size())
      fail(ErrorKind::ColumnMismatch, std::string(origin) + ":" + std::to_string(line_no) + ": field count");
    ReportedValues rv;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i].empty()) continue;
      double v = parse_double(fields[i]);
      if (header[i] == "kendall") rv.kendall = v;
      else if (header[i] == "pearson") rv.pearson = v;
      else if (header[i] == "mae") rv.mae = v;
      else fail(ErrorKind::Schema, std::string(origin) + ": unknown column '" + header[i] + "'");
    }
    out[fields.front()] = rv;
  });
  return out;
}

std::map<std::string, ReportedValues> read_reported(const std::filesystem::path& path) {
  return parse_reported(read_text(path), path.string());
}

CorrelationReport correlation_report(const MetricTable& table, std::string_view human_column,
                                     const std::vector<std::string>& metric_columns,
                                     const std::map<std::string, ReportedValues>& reported,
                                     const CorrelationOptions& opts) {
  CorrelationReport out;
  out.human_column = std::string(human_column);
  out.tolerance = opts.tolerance;
  const auto human = table.column(human_column);
  for (const auto& metric : metric_columns) {
    const auto values = table.column(metric);
    CorrelationRow row;
    row.metric = metric;
    stats::PairedSeries s;
    for (std::size_t i = 0; i < human.size(); ++i) {
      if (!human[i] || !values[i]) {
        ++row.dropped;
        continue;
      }
      s.labels.push_back(table.ids()[i]);
      s.x.push_back(*human[i]);
      s.y.push_back(*values[i]);
    }
    row.n = s.size();
    row.pairs = stats::pair_counts(s);
    row.tau_a = stats::kendall_tau(row.pairs, stats::TauVariant::TauA);
    row.tau_b = stats::kendall_tau(row.pairs, stats::TauVariant::TauB);
    row.pearson = stats::pearson_r(s);
    row.pearson_rank = stats::pearson_rank(s);
    row.mae = stats::mae(s);
    if (opts.bootstrap_iterations > 0) {
      row.tau_b_ci = stats::bootstrap_ci(
          s, [](const stats::PairedSeries& r) { return stats::kendall_tau(r, stats::TauVariant::TauB); },
          opts.bootstrap_iterations, opts.seed);
      row.pearson_ci = stats::bootstrap_ci(s, stats::pearson_r, opts.bootstrap_iterations, opts.seed);
    }
    if (auto it = reported.find(metric); it != reported.end()) {
      row.reported = it->second;
      const auto& rv = it->second;
      auto within = [&](double a, double b) { return std::fabs(a - b) <= opts.tolerance; };
      if (rv.kendall) {
        if (within(row.tau_b, *rv.kendall)) row.kendall_match = "tau_b";
        else if (within(row.tau_a, *rv.kendall)) row.kendall_match = "tau_a";
        else row.kendall_match = "none";
        row.kendall_discrepancy = row.kendall_match == "none";
      }
      if (rv.pearson) {
        double d_raw = std::fabs(row.pearson - *rv.pearson), d_rank = std::fabs(row.pearson_rank - *rv.pearson);
        if (d_raw <= opts.tolerance && d_raw <= d_rank) row.pearson_match = "pearson";
        else if (d_rank <= opts.tolerance) row.pearson_match = "pearson_rank";
        else row.pearson_match = "none";
        row.pearson_discrepancy = row.pearson_match == "none";
      }
      if (rv.mae) row.mae_discrepancy = !within(row.mae.value, *rv.mae);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string correlation_csv(const CorrelationReport& r) {
  std::string out =
      "metric,n,concordant,discordant,tau_a,tau_b,pearson,pearson_rank,mae,reported_kendall,reported_pearson,"
      "reported_mae,kendall_match,pearson_match,mae_discrepancy\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  for (const auto& row : r.rows) {
    out += csv_field(row.metric) + "," + std::to_string(row.n) + "," + std::to_string(row.pairs.concordant) + "," +
           std::to_string(row.pairs.discordant) + "," + fmt(row.tau_a) + "," + fmt(row.tau_b) + "," +
           fmt(row.pearson) + "," + fmt(row.pearson_rank) + "," +
           (row.mae.exact ? row.mae.exact->to_exact_string() : fmt(row.mae.value)) + ",";
    if (row.reported)
      out += opt(row.reported->kendall) + "," + opt(row.reported->pearson) + "," + opt(row.reported->mae) + ",";
    else
      out += ",,,";
    out += row.kendall_match + "," + row.pearson_match + "," + (row.mae_discrepancy ? "true" : "false") + "\n";
  }
  return out;
}

Json to_json(const CorrelationReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json j = {{"metric", row.metric},
              {"n", row.n},
              {"dropped", row.dropped},
              {"pairs",
               {{"concordant", row.pairs.concordant},
                {"discordant", row.pairs.discordant},
                {"tied_x", row.pairs.tied_x},
                {"tied_y", row.pairs.tied_y},
                {"tied_xy", row.pairs.tied_xy},
                {"total", row.pairs.total}}},
              {"tau_a", row.tau_a},
              {"tau_b", row.tau_b},
              {"pearson", row.pearson},
              {"pearson_rank", row.pearson_rank},
              {"mae", row.mae.value}};
    if (row.mae.exact) j["mae_exact"] = row.mae.exact->to_string();
    auto ci = [](const stats::BootstrapCi& c) {
      return Json{{"low", c.low}, {"high", c.high}, {"used", c.used}, {"skipped", c.skipped}};
    };
    if (row.tau_b_ci) j["tau_b_ci95"] = ci(*row.tau_b_ci);
    if (row.pearson_ci) j["pearson_ci95"] = ci(*row.pearson_ci);
    if (row.reported) {
      Json rep = Json::object();
      if (row.reported->kendall) rep["kendall"] = *row.reported->kendall;
      if (row.reported->pearson) rep["pearson"] = *row.reported->pearson;
      if (row.reported->mae) rep["mae"] = *row.reported->mae;
      j["reported"] = rep;
      if (row.reported->kendall) {
        j["kendall_match"] = row.kendall_match;
        j["kendall_discrepancy"] = row.kendall_discrepancy;
      }
      if (row.reported->pearson) {
        j["pearson_match"] = row.pearson_match;
        j["pearson_discrepancy"] = row.pearson_discrepancy;
      }
      if (row.reported->mae) j["mae_discrepancy"] = row.mae_discrepancy;
    }
    rows.push_back(std::move(j));
  }
  return {{"human_column", r.human_column}, {"tolerance", r.tolerance}, {"rows", rows}};
}

std::string correlation_markdown(const CorrelationReport& r) {
  std::ostringstream md;
  md << "| Metric | n | Kendall tau-b | Kendall tau-a | Pearson | Pearson (ranks) | MAE |\n";
  md << "|---|---:|---:|---:|---:|---:|---:|\n";
  auto d4 = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(4);
    s << v;
    return s.str();
  };
  std::vector<std::string> notes;
  for (const auto& row : r.rows) {
    md << "| " << row.metric << " | " << row.n << " | " << d4(row.tau_b) << " | " << d4(row.tau_a) << " | "
       << d4(row.pearson) << " | " << d4(row.pearson_rank) << " | " << d4(row.mae.value) << " |\n";
    if (!row.reported) continue;
    if (row.kendall_discrepancy)
      notes.push_back(row.metric + ": reported Kendall " + d4(*row.reported->kendall) + " not reproduced");
    if (row.pearson_discrepancy)
      notes.push_back(row.metric + ": reported Pearson " + d4(*row.reported->pearson) + " not reproduced");
    if (row.mae_discrepancy)
      notes.push_back(row.metric + ": reported MAE " + d4(*row.reported->mae) + " disagrees with the rows (" +
                      d4(row.mae.value) + ")");
  }
  if (!notes.empty()) {
    md << "\nDiscrepancies (tolerance " << d4(r.tolerance) << "):\n\n";
    for (const auto& n : notes) md << "- " << n << "\n";
  }
  return md.str();
}

}  // namespace t2ieval::report
