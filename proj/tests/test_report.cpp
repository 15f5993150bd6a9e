// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "t2ieval/report.hpp"
#include "test_util.hpp"

namespace t2ieval::report {
namespace {

using testing::fixture;

// Pair-enumeration Kendall tau-b over the non-missing rows.
double oracle_tau_b(const MetricTable& t, const std::string& a, const std::string& b) {
  std::vector<double> x, y;
  for (const auto& id : t.ids()) {
    auto va = t.value(id, a), vb = t.value(id, b);
    if (va && vb) {
      x.push_back(va->to_double());
      y.push_back(vb->to_double());
    }
  }
  double c = 0, d = 0, tx = 0, ty = 0, n0 = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      ++n0;
      double s = (x[i] - x[j]) * (y[i] - y[j]);
      if (x[i] == x[j]) ++tx;
      if (y[i] == y[j]) ++ty;
      if (s > 0) ++c;
      if (s < 0) ++d;
    }
  return (c - d) / std::sqrt((n0 - tx) * (n0 - ty));
}

Rational oracle_mae(const MetricTable& t, const std::string& a, const std::string& b) {
  Rational sum(0);
  std::int64_t n = 0;
  for (const auto& id : t.ids()) {
    Rational d = *t.value(id, a) - *t.value(id, b);
    sum = sum + (d < Rational(0) ? Rational(0) - d : d);
    ++n;
  }
  return sum / Rational(n);
}

TEST(MetricTable, CsvRoundTrip) {
  auto t = parse_metric_csv("generator_id,a,b\n\"m, 1\",1.5,\nm2,2/3,4\n");
  ASSERT_EQ(t.ids().size(), 2u);
  EXPECT_EQ(t.ids()[0], "m, 1");
  EXPECT_FALSE(t.value("m, 1", "b"));
  EXPECT_EQ(t.value("m2", "a"), Rational(2, 3));
  auto again = parse_metric_csv(metric_csv(t));
  EXPECT_EQ(metric_csv(again), metric_csv(t));
  EXPECT_EQ(again.value("m2", "a"), Rational(2, 3));
}

TEST(MetricTable, Errors) {
  EXPECT_ERROR_KIND(parse_metric_csv("model,a\nx,1\n"), ErrorKind::Schema);
  EXPECT_ERROR_KIND(parse_metric_csv("generator_id,a\nx,1\nx,2\n"), ErrorKind::ColumnMismatch);
  EXPECT_ERROR_KIND(parse_metric_csv("generator_id,a,a\nx,1,2\n"), ErrorKind::ColumnMismatch);
  EXPECT_ERROR_KIND(parse_metric_csv("generator_id,a\nx,abc\n"), ErrorKind::Schema);
  auto t = parse_metric_csv("generator_id,a\nx,1\n");
  EXPECT_ERROR_KIND(t.column_index("zz"), ErrorKind::ColumnMismatch);
}

TEST(MetricTable, MergeRequiresMatchingIds) {
  auto a = parse_metric_csv("generator_id,a\nx,1\ny,2\n");
  auto b = parse_metric_csv("generator_id,b\ny,3\nx,4\n");
  auto m = merge(a, b);
  EXPECT_EQ(m.columns(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(m.value("x", "b"), Rational(4));
  EXPECT_ERROR_KIND(merge(a, parse_metric_csv("generator_id,b\nx,1\n")), ErrorKind::ColumnMismatch);
  EXPECT_ERROR_KIND(merge(a, parse_metric_csv("generator_id,a\nx,1\ny,2\n")), ErrorKind::ColumnMismatch);
}

TEST(Leaderboard, FaithfulnessFixtureRanksEvalAlignFirst) {
  auto t = read_metric_csv(fixture("faithfulness_scores.csv"));
  auto lb = build_leaderboard(t);
  EXPECT_EQ(lb.sort_metric, "human");
  ASSERT_EQ(lb.rows.size(), 24u);
  EXPECT_EQ(lb.rows[0].generator_id, "PixArt XL2 1024 MS");
  const LeaderboardRow* pixart = nullptr;
  for (const auto& r : lb.rows)
    if (r.generator_id == "PixArt XL2 1024 MS") pixart = &r;
  ASSERT_NE(pixart, nullptr);
  EXPECT_EQ(pixart->ranks.at("evalalign"), 1);
  for (std::size_t i = 1; i < lb.rows.size(); ++i)
    EXPECT_GE(lb.rows[i - 1].values.at("human"), lb.rows[i].values.at("human"));
}

TEST(Leaderboard, SingleModelAndTies) {
  auto one = build_leaderboard(parse_metric_csv("generator_id,evalalign_f,x\nm,1,2\n"));
  ASSERT_EQ(one.rows.size(), 1u);
  for (const auto& [metric, rank] : one.rows[0].ranks) EXPECT_EQ(rank, 1) << metric;

  auto tie = build_leaderboard(parse_metric_csv("generator_id,evalalign_f\nzeta,2\nalpha,2\nmid,1\n"));
  EXPECT_EQ(tie.sort_metric, "evalalign_f");
  std::map<std::string, const LeaderboardRow*> by;
  for (const auto& r : tie.rows) by[r.generator_id] = &r;
  EXPECT_EQ(by["alpha"]->ranks.at("evalalign_f"), 1);
  EXPECT_EQ(by["zeta"]->ranks.at("evalalign_f"), 2);
  EXPECT_EQ(by["mid"]->ranks.at("evalalign_f"), 3);
  EXPECT_TRUE(by["alpha"]->tied.count("evalalign_f"));
  EXPECT_TRUE(by["zeta"]->tied.count("evalalign_f"));
  EXPECT_FALSE(by["mid"]->tied.count("evalalign_f"));
}

TEST(Leaderboard, LowerIsBetterAndEmptyColumns) {
  LeaderboardOptions opts;
  opts.lower_is_better = {"fid"};
  auto lb = build_leaderboard(parse_metric_csv("generator_id,evalalign_f,fid,empty\na,2,30,\nb,1,10,\n"), opts);
  EXPECT_EQ(lb.metrics, (std::vector<std::string>{"evalalign_f", "fid"}));
  EXPECT_EQ(lb.rows[0].generator_id, "a");
  EXPECT_EQ(lb.rows[0].ranks.at("fid"), 2);
  EXPECT_EQ(lb.rows[1].ranks.at("fid"), 1);
  EXPECT_EQ(render(lb, Format::Markdown).find("empty"), std::string::npos);
}

TEST(Leaderboard, CsvReingestIsIdentical) {
  auto lb = build_leaderboard(read_metric_csv(fixture("alignment_scores.csv")));
  auto csv = render(lb, Format::Csv);
  auto again = build_leaderboard(parse_metric_csv(csv));
  EXPECT_EQ(render(again, Format::Csv), csv);
  EXPECT_EQ(render(again, Format::Markdown), render(lb, Format::Markdown));
  EXPECT_EQ(metric_csv(to_table(again)), metric_csv(to_table(lb)));
}

TEST(Leaderboard, MarkdownGolden) {
  auto lb = build_leaderboard(read_metric_csv(fixture("faithfulness_scores.csv")));
  auto md = render(lb, Format::Markdown);
  EXPECT_EQ(md, render(lb, Format::Markdown));
  auto golden = fixture("golden/faithfulness_leaderboard.md");
  if (std::getenv("T2IEVAL_UPDATE_GOLDEN")) {
    std::filesystem::create_directories(golden.parent_path());
    std::ofstream(golden, std::ios::binary) << md;
  }
  EXPECT_EQ(md, read_text(golden));
  EXPECT_NE(md.find("| PixArt XL2 1024 MS | 2.2848<sup>1</sup> | 1.6415<sup>1</sup> |"), std::string::npos) << md;
}

TEST(Leaderboard, JsonRender) {
  auto lb = build_leaderboard(parse_metric_csv("generator_id,evalalign_f\nb,1\na,3/2\n"));
  auto j = Json::parse(render(lb, Format::Json));
  EXPECT_EQ(j["rows"][0]["generator_id"], "a");
}

TEST(Correlation, FaithfulnessFixtureMatchesPairOracle) {
  auto t = read_metric_csv(fixture("faithfulness_scores.csv"));
  std::vector<std::string> metrics = {"evalalign", "hpsv2", "clip_score", "imagereward", "pickscore", "is"};
  auto rep = correlation_report(t, "human", metrics, read_reported(fixture("faithfulness_reported.csv")));
  ASSERT_EQ(rep.rows.size(), metrics.size());
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.n, 24u);
    EXPECT_NEAR(row.tau_b, oracle_tau_b(t, "human", row.metric), 1e-12) << row.metric;
  }
  EXPECT_EQ(rep.rows[0].metric, "evalalign");
  EXPECT_TRUE(rep.rows[0].reported);
  EXPECT_FALSE(rep.rows[3].reported);
}

TEST(Correlation, AlignmentFixtureValues) {
  auto t = read_metric_csv(fixture("alignment_scores.csv"));
  auto rep = correlation_report(t, "human", {"evalalign", "hpsv2"},
                                read_reported(fixture("alignment_reported.csv")));
  for (const auto& row : rep.rows) {
    EXPECT_NEAR(row.tau_b, oracle_tau_b(t, "human", row.metric), 1e-12);
    EXPECT_NE(row.kendall_match, "none") << row.metric;
    EXPECT_NE(row.pearson_match, "none") << row.metric;
  }
  EXPECT_NEAR(rep.rows[1].tau_b, 0.5217, 0.01);
}

TEST(Correlation, HumanAgainstItself) {
  auto base = read_metric_csv(fixture("faithfulness_scores.csv"));
  MetricTable copy({"human", "human_copy"});
  for (const auto& id : base.ids()) copy.add_row(id, {base.value(id, "human"), base.value(id, "human")});
  auto rep = correlation_report(copy, "human", {"human_copy"});
  EXPECT_DOUBLE_EQ(rep.rows[0].tau_b, 1.0);
  EXPECT_NEAR(rep.rows[0].pearson, 1.0, 1e-15);
  EXPECT_EQ(rep.rows[0].mae.exact, Rational(0));
}

TEST(Correlation, MaeAgainstReportedFlags) {
  auto t = read_metric_csv(fixture("instruction_ablation.csv"));
  auto rep = correlation_report(t, "human", {"without_instruction", "with_instruction"},
                                read_reported(fixture("instruction_ablation_reported.csv")));
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].mae.exact, oracle_mae(t, "human", "without_instruction"));
  EXPECT_EQ(rep.rows[1].mae.exact, oracle_mae(t, "human", "with_instruction"));
  EXPECT_FALSE(rep.rows[0].mae_discrepancy);
  // The printed value is an order of magnitude below the recomputed one.
  EXPECT_TRUE(rep.rows[1].mae_discrepancy);
  auto md = correlation_markdown(rep);
  EXPECT_NE(md.find("with_instruction"), std::string::npos);
  EXPECT_NE(correlation_csv(rep).find("mae_discrepancy"), std::string::npos);
}

TEST(Correlation, DropsMissingAndBootstraps) {
  auto t = parse_metric_csv("generator_id,human,m\na,1,1\nb,2,\nc,3,2\nd,4,4\ne,5,3\n");
  CorrelationOptions opts;
  opts.bootstrap_iterations = 200;
  opts.seed = 3;
  auto rep = correlation_report(t, "human", {"m"}, {}, opts);
  EXPECT_EQ(rep.rows[0].n, 4u);
  EXPECT_EQ(rep.rows[0].dropped, 1u);
  ASSERT_TRUE(rep.rows[0].tau_b_ci);
  auto again = correlation_report(t, "human", {"m"}, {}, opts);
  EXPECT_EQ(again.rows[0].tau_b_ci->low, rep.rows[0].tau_b_ci->low);
  EXPECT_ERROR_KIND(correlation_report(t, "nobody", {"m"}), ErrorKind::ColumnMismatch);
}

}  // namespace
}  // namespace t2ieval::report
