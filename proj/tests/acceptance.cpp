// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any fails. Every reproduced number is checked twice: once through the
// library and once through an oracle written here from scratch.

#include <fcntl.h>
#include <httplib.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "t2ieval/backend.hpp"
#include "t2ieval/cli/commands.hpp"
#include "t2ieval/corpus.hpp"
#include "t2ieval/parsing.hpp"
#include "t2ieval/report.hpp"
#include "t2ieval/scoring.hpp"
#include "t2ieval/stats.hpp"

namespace fs = std::filesystem;
using namespace t2ieval;

namespace {

// Tolerances, pinned.
constexpr double kPublishedTol = 0.01;
constexpr double kOracleTol = 1e-12;
constexpr double kCorrelateBudgetS = 1.0;
constexpr double kPropertyBudgetS = 10.0;
constexpr double kRandomKappaBound = 0.05;

fs::path fixture(const std::string& name) { return fs::path(T2IEVAL_FIXTURES) / name; }

struct Scratch {
  fs::path path;
  Scratch() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("t2ieval_accept_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "t2ieval");
  std::ostringstream o, e;
  int code = cli::run_cli(args, o, e);
  if (out) *out = o.str() + e.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---- oracles ---------------------------------------------------------------

struct OracleCounts {
  std::int64_t concordant = 0, discordant = 0, tied_x = 0, tied_y = 0, tied_xy = 0, total = 0;
};

template <typename T>
OracleCounts brute_pairs(const std::vector<T>& x, const std::vector<T>& y) {
  OracleCounts c;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      ++c.total;
      const bool tx = x[i] == x[j], ty = y[i] == y[j];
      if (tx) ++c.tied_x;
      if (ty) ++c.tied_y;
      if (tx && ty) ++c.tied_xy;
      if (tx || ty) continue;
      if ((x[i] < x[j]) == (y[i] < y[j])) ++c.concordant;
      else ++c.discordant;
    }
  return c;
}

double brute_tau_a(const OracleCounts& c) {
  return static_cast<double>(c.concordant - c.discordant) / static_cast<double>(c.total);
}

double brute_tau_b(const OracleCounts& c) {
  return static_cast<double>(c.concordant - c.discordant) /
         std::sqrt(static_cast<double>(c.total - c.tied_x) * static_cast<double>(c.total - c.tied_y));
}

double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Average ranks by counting, independent of any sort.
std::vector<double> naive_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) less += w < v[i], equal += w == v[i];
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

struct Columns {
  std::vector<Rational> human, metric;
};

Columns paired(const report::MetricTable& t, const std::string& human, const std::string& metric) {
  Columns c;
  auto h = t.column(human), m = t.column(metric);
  for (std::size_t i = 0; i < h.size(); ++i)
    if (h[i] && m[i]) c.human.push_back(*h[i]), c.metric.push_back(*m[i]);
  return c;
}

std::vector<double> as_double(const std::vector<Rational>& v) {
  std::vector<double> out;
  for (const auto& r : v) out.push_back(r.to_double());
  return out;
}

// ---- reporting -------------------------------------------------------------

int failures = 0;

void verdict(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

template <typename F>
void criterion(const std::string& name, F&& body) {
  try {
    std::string detail;
    bool ok = body(detail);
    verdict(name, ok, detail);
  } catch (const std::exception& e) {
    verdict(name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Correlation reproduction against published values for one table.
bool correlation_reproduction(const std::string& table_csv, const std::string& reported_csv, std::string& detail) {
  Scratch dir;
  const auto t0 = std::chrono::steady_clock::now();
  std::string log;
  int code = cli({"correlate", "--table", fixture(table_csv).string(), "--reported", fixture(reported_csv).string(),
                  "--format", "json", "--out", dir.path.string()},
                 &log);
  const double elapsed = seconds_since(t0);
  if (code != 0) {
    detail = "correlate exited " + std::to_string(code) + ": " + log;
    return false;
  }
  const auto report = Json::parse(slurp(dir.path / "correlation.json"));
  const auto table = report::read_metric_csv(fixture(table_csv));
  const auto published = report::read_reported(fixture(reported_csv));

  bool ok = elapsed < kCorrelateBudgetS;
  std::ostringstream d;
  for (const auto& [metric, want] : published) {
    const Json* row = nullptr;
    for (const auto& r : report["rows"])
      if (r["metric"] == metric) row = &r;
    if (!row) {
      d << metric << " missing; ";
      ok = false;
      continue;
    }
    const auto cols = paired(table, "human", metric);
    const auto counts = brute_pairs(cols.human, cols.metric);
    const double oa = brute_tau_a(counts), ob = brute_tau_b(counts);
    const auto hx = as_double(cols.human), mx = as_double(cols.metric);
    const double op = naive_pearson(hx, mx), opr = naive_pearson(naive_ranks(hx), naive_ranks(mx));

    // Dual route: library output must agree with the oracle before we compare
    // either with the published value.
    const bool agree = std::fabs((*row)["tau_a"].get<double>() - oa) <= kOracleTol &&
                       std::fabs((*row)["tau_b"].get<double>() - ob) <= kOracleTol &&
                       std::fabs((*row)["pearson"].get<double>() - op) <= kOracleTol &&
                       std::fabs((*row)["pearson_rank"].get<double>() - opr) <= kOracleTol;
    std::string kvariant = "none", pvariant = "none";
    if (std::fabs(ob - *want.kendall) <= kPublishedTol) kvariant = "tau_b";
    else if (std::fabs(oa - *want.kendall) <= kPublishedTol) kvariant = "tau_a";
    // The product-moment value wins when both are in tolerance and it is the closer one.
    const double d_raw = std::fabs(op - *want.pearson), d_rank = std::fabs(opr - *want.pearson);
    if (d_raw <= kPublishedTol && d_raw <= d_rank) pvariant = "pearson";
    else if (d_rank <= kPublishedTol) pvariant = "pearson_rank";
    const bool matched = kvariant != "none" && pvariant != "none" && (*row)["kendall_match"] == kvariant &&
                         (*row)["pearson_match"] == pvariant;
    ok = ok && agree && matched;
    d << metric << " kendall " << fmt(kvariant == "tau_a" ? oa : ob) << " vs " << fmt(*want.kendall) << " ["
      << kvariant << "], pearson " << fmt(pvariant == "pearson_rank" ? opr : op) << " vs " << fmt(*want.pearson)
      << " [" << pvariant << "]" << (agree ? "" : " ORACLE-MISMATCH") << "; ";
  }
  d << "runtime " << fmt(elapsed) << "s";
  detail = d.str();
  return ok;
}

// ---- criteria --------------------------------------------------------------

bool oracle_equivalence(std::string& detail) {
  std::mt19937_64 rng(20260101);
  std::uniform_int_distribution<int> len(2, 8), label(0, 3);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t checked = 0, degenerate = 0, mismatches = 0;
  while (checked < 10000) {
    stats::PairedSeries s;
    std::vector<int> xi, yi;
    for (int i = len(rng); i > 0; --i) {
      xi.push_back(label(rng));
      yi.push_back(label(rng));
      s.x.emplace_back(xi.back());
      s.y.emplace_back(yi.back());
      s.labels.push_back(std::to_string(s.labels.size()));
    }
    const auto oc = brute_pairs(xi, yi);
    if (oc.tied_x == oc.total || oc.tied_y == oc.total) {
      ++degenerate;
      continue;
    }
    ++checked;
    const auto c = stats::pair_counts(s);
    bool same = c.concordant == oc.concordant && c.discordant == oc.discordant && c.tied_x == oc.tied_x &&
                c.tied_y == oc.tied_y && c.tied_xy == oc.tied_xy && c.total == oc.total;
    same = same && stats::kendall_tau_a_exact(c) == Rational(oc.concordant - oc.discordant, oc.total);
    // Counts and tau-a are exact; tau-b involves a square root.
    same = same && std::fabs(stats::kendall_tau(s, stats::TauVariant::TauB) - brute_tau_b(oc)) <= kOracleTol;
    std::vector<double> xd(xi.begin(), xi.end()), yd(yi.begin(), yi.end());
    same = same && std::fabs(stats::pearson_r(s) - naive_pearson(xd, yd)) <= kOracleTol;
    if (!same) ++mismatches;
  }
  const double elapsed = seconds_since(t0);
  detail = std::to_string(checked) + " cases (" + std::to_string(degenerate) + " constant series skipped), " +
           std::to_string(mismatches) + " mismatches, " + fmt(elapsed) + "s";
  return mismatches == 0 && elapsed < kPropertyBudgetS;
}

bool parser_self_consistency(std::string& detail) {
  const auto bank = protocol::builtin_banks();
  std::size_t cases = 0, wrong = 0;
  for (const auto* q : bank.all())
    for (const auto& o : q->options) {
      ++cases;
      try {
        if (parsing::extract_option(o.text, *q).option_label != o.label) ++wrong;
      } catch (const Error&) {
        ++wrong;
      }
    }
  const auto& hand = bank.at("faith.hand");
  struct Case {
    const char* text;
    int label;  // -1: must be rejected
  };
  const Case suites[] = {
      {"3", 3},
      {"  **4** because", 4},
      {"0", 0},
      {"5.", 5},
      {"Option 2", 2},
      {"3rd finger is bent, so option 2", 2},
      {"2.5 out of 5? I'd say option 4", 4},
      {"There are 6 fingers; answer: 1", 1},
      {"option 12 then option 3", 3},
      {"7", -1},
      {"There are 6 fingers", -1},
  };
  std::size_t suite_wrong = 0;
  for (const auto& c : suites) {
    int got = -1;
    try {
      got = parsing::extract_option(c.text, hand).option_label;
    } catch (const Error&) {
    }
    if (got != c.label) ++suite_wrong;
  }
  detail = std::to_string(bank.all().size()) + " questions, " + std::to_string(cases - wrong) + "/" +
           std::to_string(cases) + " option texts, " + std::to_string(std::size(suites) - suite_wrong) + "/" +
           std::to_string(std::size(suites)) + " digit cases";
  return bank.all().size() == 11 && wrong == 0 && suite_wrong == 0;
}

bool mock_end_to_end(std::string& detail) {
  const auto bank = protocol::builtin_banks();
  auto corpus = corpus::ingest_manifest(fixture("e2e/manifest.jsonl"));
  backend::MockBackend mock("mock", 32, backend::MockBackend::load_script(fixture("e2e/script.jsonl")));
  std::vector<protocol::RenderedInstruction> instrs;
  for (const auto& s : corpus.samples())
    for (const auto* q : bank.all())
      if (protocol::is_applicable(*q, corpus.annotation_for(s.prompt_id)))
        instrs.push_back(protocol::render(*q, corpus.annotation_for(s.prompt_id), s.image_uri, s.sample_id));
  const auto parsed = parsing::parse_batch(backend::infer_batch(mock, instrs, 4), bank);
  const auto groups = scoring::score_choices(corpus, bank, parsed.parsed, scoring::ScoringConfig{});

  // Worked by hand from the scripted responses and the score maps.
  const std::map<std::string, std::pair<Rational, Rational>> expected = {
      {"gA", {Rational(59, 16), Rational(7)}},
      {"gB", {Rational(31, 16), Rational(19, 4)}},
      {"gC", {Rational(17, 24), Rational(13, 4)}}};
  bool ok = groups.size() == 3;
  std::size_t images = 0, invariant_checks = 0, invariant_broken = 0;
  std::ostringstream d;
  for (const auto& [g, list] : groups) {
    images += list.size();
    const auto r = scoring::aggregate_model(list, g);
    const auto& [f, a] = expected.at(g);
    const bool hit = r.evalalign_f == f && r.evalalign_a == a;
    ok = ok && hit;
    d << g << " F=" << (r.evalalign_f ? r.evalalign_f->to_string() : "-") << " A="
      << (r.evalalign_a ? r.evalalign_a->to_string() : "-") << (hit ? "" : " (expected " + f.to_string() + ", " +
                                                                            a.to_string() + ")")
      << "; ";
    for (const auto& img : list)
      for (TaskKind task : {TaskKind::Faithfulness, TaskKind::Alignment}) {
        std::vector<scoring::QuestionScore> of_task;
        for (const auto& q : img.per_question)
          if (q.task == task) of_task.push_back(q);
        auto sum = scoring::score_image(of_task, task, scoring::AggregationMode::Sum);
        auto mean = scoring::score_image(of_task, task, scoring::AggregationMode::Mean);
        if (!sum && !mean) continue;
        ++invariant_checks;
        if (!sum || !mean || *sum != *mean * Rational(static_cast<std::int64_t>(img.applicable_count(task))))
          ++invariant_broken;
      }
  }
  ok = ok && images == 12 && invariant_broken == 0;
  d << images << " images, Sum=Mean*n held " << invariant_checks - invariant_broken << "/" << invariant_checks;
  detail = d.str();
  return ok;
}

bool mae_ablation(std::string& detail) {
  struct Target {
    const char* table;
    const char* reported;
  };
  bool ok = true;
  std::ostringstream d;
  std::map<std::string, bool> flags;
  for (const auto& t : {Target{"instruction_ablation.csv", "instruction_ablation_reported.csv"},
                        Target{"multiscale_ablation.csv", "multiscale_ablation_reported.csv"}}) {
    Scratch dir;
    std::string log;
    if (cli({"correlate", "--table", fixture(t.table).string(), "--reported", fixture(t.reported).string(), "--out",
             dir.path.string()},
            &log) != 0) {
      detail = std::string("correlate failed on ") + t.table + ": " + log;
      return false;
    }
    const auto report = Json::parse(slurp(dir.path / "correlation.json"));
    const auto table = report::read_metric_csv(fixture(t.table));
    for (const auto& row : report["rows"]) {
      const std::string metric = row["metric"];
      const auto cols = paired(table, "human", metric);
      Rational sum(0);
      for (std::size_t i = 0; i < cols.human.size(); ++i) sum = sum + abs(cols.human[i] - cols.metric[i]);
      const Rational oracle = sum / Rational(static_cast<std::int64_t>(cols.human.size()));
      const bool exact = row.contains("mae_exact") && Rational::parse(row["mae_exact"].get<std::string>()) == oracle;
      ok = ok && exact;
      flags[metric] = row.value("mae_discrepancy", false);
      d << metric << " " << oracle.to_string() << (exact ? "" : " MISMATCH") << (flags[metric] ? " flagged" : "")
        << "; ";
    }
  }
  // The printed with-instruction value contradicts its own rows; the report
  // must say so, and must not flag the consistent row.
  ok = ok && flags["with_instruction"] && !flags["without_instruction"];
  detail = d.str();
  return ok;
}

bool kappa(std::string& detail) {
  const Rational unanimous = stats::cohen_kappa({1, 2, 3, 1, 2}, {1, 2, 3, 1, 2});
  // p_o = 1/2 and both marginals uniform, so p_e = 1/2.
  const Rational chance = stats::cohen_kappa({1, 1, 2, 2}, {1, 2, 1, 2});
  std::mt19937_64 rng(42);
  std::bernoulli_distribution coin(0.5);
  std::vector<int> a, b;
  for (int i = 0; i < 10000; ++i) a.push_back(coin(rng)), b.push_back(coin(rng));
  const double random = stats::cohen_kappa(a, b).to_double();
  detail = "unanimous " + unanimous.to_string() + ", chance " + chance.to_string() + ", random n=10000 " + fmt(random);
  return unanimous == Rational(1) && chance == Rational(0) && std::fabs(random) < kRandomKappaBound;
}

// Crash recovery through the real binary: save, SIGKILL, restart, compare.
class Server {
 public:
  explicit Server(const fs::path& out) {
    fs::remove(out / "serve.json");
    std::vector<std::string> args = {T2IEVAL_CLI, "serve",  "--manifest", fixture("e2e/manifest.jsonl").string(),
                                     "--accounts", (out / "accounts.json").string(), "--port", "0",
                                     "--out",      out.string()};
    pid_ = ::fork();
    if (pid_ == 0) {
      int fd = ::open((out / "server.log").c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
      ::dup2(fd, 1);
      ::dup2(fd, 2);
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      ::execv(argv[0], argv.data());
      ::_exit(127);
    }
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
    while (std::chrono::steady_clock::now() < deadline) {
      const auto text = slurp(out / "serve.json");
      if (!text.empty() && text.back() == '\n') {
        port = Json::parse(text)["port"].get<int>();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }
  ~Server() { kill(); }
  void kill() {
    if (pid_ <= 0) return;
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }
  int port = -1;

 private:
  pid_t pid_ = -1;
};

bool crash_recovery(std::string& detail) {
  Scratch dir;
  std::ofstream(dir.path / "accounts.json")
      << R"({"accounts":[{"id":"ann","token":"tok-a"},{"id":"insp","token":"tok-i","role":"inspector"}]})";
  const httplib::Headers ann = {{"Authorization", "Bearer tok-a"}}, insp = {{"Authorization", "Bearer tok-i"}};
  std::string before;
  {
    Server s(dir.path);
    if (s.port <= 0) {
      detail = "server did not start: " + slurp(dir.path / "server.log");
      return false;
    }
    httplib::Client c("127.0.0.1", s.port);
    for (const char* q : {"align.object", "align.count", "align.color", "align.spatial"}) {
      auto r = c.Post("/api/samples/sA1/answers", ann, Json{{"question_id", q}, {"option_label", 2}}.dump(),
                      "application/json");
      if (!r || r->status != 200) {
        detail = std::string("save failed for ") + q;
        return false;
      }
    }
    auto submit = c.Post("/api/samples/sA1/submit", ann, "{}", "application/json");
    auto draft = c.Post("/api/samples/sB1/answers", ann, R"({"question_id":"align.object","option_label":3})",
                        "application/json");
    if (!submit || submit->status != 200 || !draft || draft->status != 200) {
      detail = "submit or draft save was not acknowledged";
      return false;
    }
    before = c.Get("/api/export/sft", insp)->body;
    s.kill();
  }
  Server s(dir.path);
  if (s.port <= 0) {
    detail = "restart failed: " + slurp(dir.path / "server.log");
    return false;
  }
  httplib::Client c("127.0.0.1", s.port);
  const auto after = c.Get("/api/export/sft", insp)->body;
  const auto sample = Json::parse(c.Get("/api/samples/sB1", ann)->body);
  const bool draft_back = sample["answers"].value("align.object", -1) == 3;
  const bool same = !before.empty() && before == after;
  detail = std::string("export ") + (same ? "byte-identical" : "differs") + " (" + std::to_string(before.size()) +
           " bytes), saved draft " + (draft_back ? "recovered" : "lost");
  return same && draft_back;
}

bool reproducibility(std::string& detail) {
  Scratch dir;
  const std::string manifest = fixture("e2e/manifest.jsonl").string();
  const auto seed_run = dir.path / "seed";
  if (cli({"evaluate", "--manifest", manifest, "--script", fixture("e2e/script.jsonl").string(), "--seed", "7",
           "--out", seed_run.string()}) != 0) {
    detail = "scripted run failed";
    return false;
  }
  const std::string log = (seed_run / "replay.jsonl").string();
  std::vector<fs::path> runs = {dir.path / "r1", dir.path / "r2"};
  for (const auto& r : runs)
    if (cli({"evaluate", "--manifest", manifest, "--replay", log, "--seed", "7", "--out", r.string()}) != 0) {
      detail = "replay run failed";
      return false;
    }
  bool ok = true;
  std::ostringstream d;
  for (const char* f : {"parsed.jsonl", "scores.csv", "scores.json"}) {
    const auto a = slurp(runs[0] / f), b = slurp(runs[1] / f);
    const bool same = !a.empty() && a == b && a == slurp(seed_run / f);
    ok = ok && same;
    d << f << (same ? " identical" : " DIFFERS") << "; ";
  }
  detail = d.str();
  return ok;
}

}  // namespace

int main() {
  criterion("faithfulness correlation reproduction", [](std::string& d) {
    return correlation_reproduction("faithfulness_scores.csv", "faithfulness_reported.csv", d);
  });
  criterion("alignment correlation reproduction", [](std::string& d) {
    return correlation_reproduction("alignment_scores.csv", "alignment_reported.csv", d);
  });
  criterion("correlation oracle equivalence", oracle_equivalence);
  criterion("parser self-consistency", parser_self_consistency);
  criterion("mock end-to-end scores", mock_end_to_end);
  criterion("MAE ablation against oracle", mae_ablation);
  criterion("kappa", kappa);
  criterion("event-log crash recovery", crash_recovery);
  criterion("replay reproducibility", reproducibility);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
