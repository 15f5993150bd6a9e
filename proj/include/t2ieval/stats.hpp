// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "t2ieval/rational.hpp"

namespace t2ieval::stats {

struct PairedSeries {
  std::vector<std::string> labels;
  std::vector<Rational> x;
  std::vector<Rational> y;

  std::size_t size() const { return x.size(); }
};

// Throws Error(Schema) on unequal lengths, Error(DegenerateSeries) when
// shorter than min_length.
void validate(const PairedSeries& s, std::size_t min_length = 2);

enum class TauVariant { TauA, TauB };

// Pair classification over all n(n-1)/2 pairs. tied_x counts pairs tied in x
// (whether or not also tied in y); likewise tied_y. tied_xy counts joint ties.
struct PairCounts {
  std::int64_t n = 0;
  std::int64_t total = 0;
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  std::int64_t tied_x = 0;
  std::int64_t tied_y = 0;
  std::int64_t tied_xy = 0;
};

// Knight's O(n log n) algorithm.
PairCounts pair_counts(const PairedSeries& s);

// Throws Error(DegenerateSeries) when either series is constant.
double kendall_tau(const PairedSeries& s, TauVariant variant = TauVariant::TauB);
double kendall_tau(const PairCounts& c, TauVariant variant);
// Tau-a is a ratio of integers and is available exactly.
Rational kendall_tau_a_exact(const PairCounts& c);

// Product-moment correlation, two-pass with compensated summation.
// Throws Error(DegenerateSeries) on zero variance.
double pearson_r(const PairedSeries& s);

// 1-based ranks; tied values share the average of their positions.
std::vector<Rational> rank_average(const std::vector<Rational>& values);
// pearson_r over rank_average of both series.
double pearson_rank(const PairedSeries& s);

struct MaeResult {
  double value = 0.0;
  std::optional<Rational> exact;  // absent only if exact arithmetic overflowed
};

MaeResult mae(const PairedSeries& s);

// Category labels per item (rows) and annotator (columns).
struct AgreementTable {
  std::vector<std::string> annotators;
  std::vector<std::vector<int>> answers;

  std::size_t items() const { return answers.size(); }
};

void validate(const AgreementTable& t);

struct PairKappa {
  std::string a;
  std::string b;
  Rational kappa;
};

struct KappaSummary {
  std::vector<PairKappa> pairs;
  double mean = 0.0;
  std::optional<Rational> mean_exact;
  Rational min;
};

// Cohen's kappa between two label columns, exact. Throws
// Error(DegenerateAgreement) when chance agreement is 1.
Rational cohen_kappa(const std::vector<int>& a, const std::vector<int>& b);
KappaSummary cohen_kappa_pairwise(const AgreementTable& t);
Rational fleiss_kappa(const AgreementTable& t);

struct BootstrapCi {
  double low = 0.0;
  double high = 0.0;
  std::size_t used = 0;     // resamples with a defined statistic
  std::size_t skipped = 0;  // degenerate resamples
};

using SeriesStatistic = std::function<double(const PairedSeries&)>;

// Percentile 95% interval. Resample i draws from a generator seeded with a
// value derived from (seed, i), so the result is independent of threading.
BootstrapCi bootstrap_ci(const PairedSeries& s, const SeriesStatistic& statistic, std::size_t iterations,
                         std::uint64_t seed, unsigned threads = 0);

}  // namespace t2ieval::stats
