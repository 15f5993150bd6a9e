// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>

#include "t2ieval/errors.hpp"

namespace t2ieval::stats {

namespace {

// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double v) {
    double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

std::int64_t choose2(std::int64_t t) { return t * (t - 1) / 2; }

// Pairs within runs of equal keys in an already sorted sequence.
template <typename It, typename Eq>
std::int64_t tied_pairs(It first, It last, Eq eq) {
  std::int64_t total = 0;
  for (It run = first; run != last;) {
    It end = run;
    while (end != last && eq(*end, *run)) ++end;
    total += choose2(end - run);
    run = end;
  }
  return total;
}

// Merge sort on y counting strictly inverted pairs.
std::int64_t count_swaps(std::vector<Rational>& v, std::vector<Rational>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = count_swaps(v, buf, lo, mid) + count_swaps(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[i] <= v[j]) {
      buf[k++] = v[i++];
    } else {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

bool constant(const std::vector<Rational>& v) {
  return std::all_of(v.begin(), v.end(), [&](const Rational& r) { return r == v.front(); });
}

Rational reduce_wide(__int128 num, __int128 den) {
  if (den < 0) {
    num = -num;
    den = -den;
  }
  __int128 a = num < 0 ? -num : num, b = den;
  while (b != 0) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  if (a > 1) {
    num /= a;
    den /= a;
  }
  constexpr __int128 kMax = std::numeric_limits<std::int64_t>::max();
  if (num > kMax || -num > kMax || den > kMax) throw std::overflow_error("kappa does not fit a 64-bit rational");
  return Rational(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double quantile(const std::vector<double>& sorted, double p) {
  double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  auto lo = static_cast<std::size_t>(std::floor(h));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

void validate(const PairedSeries& s, std::size_t min_length) {
  if (s.x.size() != s.y.size())
    fail(ErrorKind::Schema, "paired series lengths differ: " + std::to_string(s.x.size()) + " vs " +
                                std::to_string(s.y.size()));
  if (!s.labels.empty() && s.labels.size() != s.x.size())
    fail(ErrorKind::Schema, "paired series has " + std::to_string(s.labels.size()) + " labels for " +
                                std::to_string(s.x.size()) + " values");
  if (s.x.size() < min_length)
    fail(ErrorKind::DegenerateSeries,
         "need at least " + std::to_string(min_length) + " pairs, got " + std::to_string(s.x.size()));
}

PairCounts pair_counts(const PairedSeries& s) {
  validate(s);
  const std::size_t n = s.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s.x[a] != s.x[b]) return s.x[a] < s.x[b];
    return s.y[a] < s.y[b];
  });

  PairCounts c;
  c.n = static_cast<std::int64_t>(n);
  c.total = choose2(c.n);
  c.tied_x = tied_pairs(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.x[a] == s.x[b]; });
  c.tied_xy = tied_pairs(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return s.x[a] == s.x[b] && s.y[a] == s.y[b]; });

  std::vector<Rational> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = s.y[order[i]];
  c.discordant = count_swaps(ys, buf, 0, n);
  c.tied_y = tied_pairs(ys.begin(), ys.end(), [](const Rational& a, const Rational& b) { return a == b; });
  c.concordant = c.total - c.tied_x - c.tied_y + c.tied_xy - c.discordant;
  return c;
}

double kendall_tau(const PairCounts& c, TauVariant variant) {
  if (c.tied_x == c.total || c.tied_y == c.total)
    fail(ErrorKind::DegenerateSeries, "kendall tau undefined: a series is constant");
  const double diff = static_cast<double>(c.concordant - c.discordant);
  if (variant == TauVariant::TauA) return diff / static_cast<double>(c.total);
  const double denom = std::sqrt(static_cast<double>(c.total - c.tied_x)) * std::sqrt(static_cast<double>(c.total - c.tied_y));
  return std::clamp(diff / denom, -1.0, 1.0);
}

double kendall_tau(const PairedSeries& s, TauVariant variant) { return kendall_tau(pair_counts(s), variant); }

Rational kendall_tau_a_exact(const PairCounts& c) {
  if (c.tied_x == c.total || c.tied_y == c.total)
    fail(ErrorKind::DegenerateSeries, "kendall tau undefined: a series is constant");
  return Rational(c.concordant - c.discordant, c.total);
}

double pearson_r(const PairedSeries& s) {
  validate(s);
  const std::size_t n = s.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = s.x[i].to_double();
    y[i] = s.y[i].to_double();
  }
  if (constant(s.x) || constant(s.y)) fail(ErrorKind::DegenerateSeries, "pearson r undefined: zero variance");
  CompensatedSum sx, sy;
  for (std::size_t i = 0; i < n; ++i) {
    sx.add(x[i]);
    sy.add(y[i]);
  }
  const double mx = sx.value() / static_cast<double>(n);
  const double my = sy.value() / static_cast<double>(n);
  CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy.add(dx * dy);
    sxx.add(dx * dx);
    syy.add(dy * dy);
  }
  if (sxx.value() <= 0 || syy.value() <= 0) fail(ErrorKind::DegenerateSeries, "pearson r undefined: zero variance");
  return std::clamp(sxy.value() / (std::sqrt(sxx.value()) * std::sqrt(syy.value())), -1.0, 1.0);
}

std::vector<Rational> rank_average(const std::vector<Rational>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<Rational> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share rank ((i+1)+(j+1))/2.
    Rational r(static_cast<std::int64_t>(i + j + 2), 2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson_rank(const PairedSeries& s) {
  validate(s);
  PairedSeries ranked{s.labels, rank_average(s.x), rank_average(s.y)};
  return pearson_r(ranked);
}

MaeResult mae(const PairedSeries& s) {
  validate(s, 1);
  MaeResult r;
  try {
    Rational sum;
    for (std::size_t i = 0; i < s.size(); ++i) sum += abs(s.x[i] - s.y[i]);
    r.exact = sum / Rational(static_cast<std::int64_t>(s.size()));
    r.value = r.exact->to_double();
  } catch (const std::overflow_error&) {
    CompensatedSum sum;
    for (std::size_t i = 0; i < s.size(); ++i) sum.add(std::fabs(s.x[i].to_double() - s.y[i].to_double()));
    r.value = sum.value() / static_cast<double>(s.size());
  }
  return r;
}

void validate(const AgreementTable& t) {
  if (t.annotators.size() < 2) fail(ErrorKind::DegenerateAgreement, "agreement needs at least two annotators");
  if (t.answers.empty()) fail(ErrorKind::DegenerateAgreement, "agreement table has no items");
  for (std::size_t i = 0; i < t.answers.size(); ++i)
    if (t.answers[i].size() != t.annotators.size())
      fail(ErrorKind::Schema, "agreement item " + std::to_string(i) + " has " + std::to_string(t.answers[i].size()) +
                                  " answers for " + std::to_string(t.annotators.size()) + " annotators");
}

Rational cohen_kappa(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty()) fail(ErrorKind::Schema, "cohen kappa needs two equal, non-empty columns");
  const auto n = static_cast<__int128>(a.size());
  std::map<int, std::int64_t> ca, cb;
  std::int64_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    if (a[i] == b[i]) ++agree;
  }
  __int128 chance = 0;  // n^2 * p_e
  for (const auto& [label, count] : ca)
    if (auto it = cb.find(label); it != cb.end()) chance += static_cast<__int128>(count) * it->second;
  // kappa = (p_o - p_e) / (1 - p_e), scaled by n^2.
  const __int128 den = n * n - chance;
  if (den == 0) fail(ErrorKind::DegenerateAgreement, "cohen kappa undefined: chance agreement is 1");
  return reduce_wide(n * agree - chance, den);
}

KappaSummary cohen_kappa_pairwise(const AgreementTable& t) {
  validate(t);
  KappaSummary out;
  const std::size_t m = t.annotators.size();
  std::vector<std::vector<int>> cols(m);
  for (const auto& row : t.answers)
    for (std::size_t j = 0; j < m; ++j) cols[j].push_back(row[j]);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      out.pairs.push_back({t.annotators[i], t.annotators[j], cohen_kappa(cols[i], cols[j])});
  CompensatedSum sum;
  out.min = out.pairs.front().kappa;
  for (const auto& p : out.pairs) {
    sum.add(p.kappa.to_double());
    out.min = std::min(out.min, p.kappa);
  }
  out.mean = sum.value() / static_cast<double>(out.pairs.size());
  try {
    Rational exact;
    for (const auto& p : out.pairs) exact += p.kappa;
    out.mean_exact = exact / Rational(static_cast<std::int64_t>(out.pairs.size()));
    out.mean = out.mean_exact->to_double();
  } catch (const std::overflow_error&) {
    out.mean_exact.reset();
  }
  return out;
}

Rational fleiss_kappa(const AgreementTable& t) {
  validate(t);
  const auto items = static_cast<__int128>(t.items());
  const auto raters = static_cast<__int128>(t.annotators.size());
  std::map<int, __int128> totals;
  __int128 sum_sq = 0;  // sum over items and categories of n_ij^2
  for (const auto& row : t.answers) {
    std::map<int, __int128> counts;
    for (int label : row) ++counts[label];
    for (const auto& [label, c] : counts) {
      sum_sq += c * c;
      totals[label] += c;
    }
  }
  __int128 b = 0;  // sum over categories of c_j^2
  for (const auto& [label, c] : totals) b += c * c;
  const __int128 d1 = items * raters * (raters - 1);
  const __int128 d2 = (items * raters) * (items * raters);
  if (d2 == b) fail(ErrorKind::DegenerateAgreement, "fleiss kappa undefined: a single category is used");
  // P_bar = (sum_sq - N m) / d1, Pe = b / d2, kappa = (P_bar - Pe) / (1 - Pe).
  return reduce_wide((sum_sq - items * raters) * d2 - b * d1, d1 * (d2 - b));
}

BootstrapCi bootstrap_ci(const PairedSeries& s, const SeriesStatistic& statistic, std::size_t iterations,
                         std::uint64_t seed, unsigned threads) {
  validate(s);
  if (iterations < 100) fail(ErrorKind::Config, "bootstrap needs at least 100 iterations");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, iterations));

  const std::size_t n = s.size();
  std::vector<std::optional<double>> values(iterations);
  auto work = [&](unsigned worker) {
    for (std::size_t it = worker; it < iterations; it += threads) {
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(it))));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      PairedSeries r;
      r.x.reserve(n);
      r.y.reserve(n);
      for (std::size_t k = 0; k < n; ++k) {
        std::size_t idx = pick(rng);
        r.x.push_back(s.x[idx]);
        r.y.push_back(s.y[idx]);
      }
      try {
        values[it] = statistic(r);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateSeries) throw;
      }
    }
  };
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        work(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> ok;
  for (const auto& v : values)
    if (v) ok.push_back(*v);
  if (ok.empty()) fail(ErrorKind::DegenerateSeries, "every bootstrap resample was degenerate");
  std::sort(ok.begin(), ok.end());
  BootstrapCi ci;
  ci.low = quantile(ok, 0.025);
  ci.high = quantile(ok, 0.975);
  ci.used = ok.size();
  ci.skipped = iterations - ok.size();
  return ci;
}

}  // namespace t2ieval::stats
