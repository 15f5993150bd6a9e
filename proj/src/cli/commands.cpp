// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/cli/commands.hpp"

#include <CLI11.hpp>
#include <signal.h>
#include <unistd.h>

#include <chrono>
#include <iostream>

#include "t2ieval/annosvc.hpp"
#include "t2ieval/annosvc_http.hpp"
#include "t2ieval/backend.hpp"
#include "t2ieval/cli/config.hpp"
#include "t2ieval/corpus.hpp"
#include "t2ieval/errors.hpp"
#include "t2ieval/hashing.hpp"
#include "t2ieval/parsing.hpp"
#include "t2ieval/protocol.hpp"
#include "t2ieval/report.hpp"
#include "t2ieval/scoring.hpp"

#ifndef T2IEVAL_VERSION
#define T2IEVAL_VERSION "0.0.0"
#endif
#ifndef T2IEVAL_DATA_DIR
#define T2IEVAL_DATA_DIR "data"
#endif

namespace t2ieval::cli {

namespace fs = std::filesystem;

std::string data_dir() { return T2IEVAL_DATA_DIR; }
std::string version() { return T2IEVAL_VERSION; }

namespace {

// Files a run read and wrote, for the run manifest.
struct Run {
  std::string command;
  Json cfg;
  fs::path out;
  std::ostream& log;
  std::vector<std::pair<std::string, fs::path>> inputs;
  std::vector<fs::path> outputs;

  fs::path input(const std::string& role, const std::string& key) {
    const std::string p = get_string(cfg, key);
    if (p.empty()) fail(ErrorKind::Usage, command + " needs " + key);
    inputs.emplace_back(role, p);
    return p;
  }

  void write(const std::string& name, std::string_view content) {
    fs::path p = out / name;
    write_text(p, content);
    outputs.push_back(p);
  }
};

protocol::QuestionBank load_bank(Run& run) {
  const std::string path = get_string(run.cfg, "protocol.path");
  if (path.empty()) return protocol::builtin_banks();
  run.inputs.emplace_back("protocol", path);
  return protocol::load_protocol(path);
}

corpus::Corpus load_corpus(Run& run) { return corpus::ingest_manifest(run.input("corpus", "corpus.manifest")); }

std::string jsonl_of(const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) out += dump_line(r) + '\n';
  return out;
}

std::vector<TaskKind> tasks_of(const Json& cfg) {
  std::vector<TaskKind> out;
  for (const auto& t : get_value(cfg, "evaluate.tasks")) {
    TaskKind k = parse_task(t.get<std::string>());
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  if (out.empty()) fail(ErrorKind::Config, "evaluate.tasks is empty");
  return out;
}

Json response_json(const backend::InferenceResponse& r) {
  Json j = {{"sample_id", r.sample_id},
            {"question_id", r.question_id},
            {"raw_text", r.raw_text},
            {"finish_reason", backend::to_string(r.finish_reason)},
            {"request_hash", r.request_hash}};
  if (r.error_kind) {
    j["error_kind"] = to_string(*r.error_kind);
    j["error"] = r.error;
  }
  return j;
}

// Scores parsed choices and writes scores.csv, scores.json, images.jsonl and
// leaderboard.md. Returns the per-generator reports.
std::vector<scoring::ScoreReport> write_scores(Run& run, const corpus::Corpus& corpus,
                                               const protocol::QuestionBank& bank,
                                               std::span<const parsing::ParsedChoice> choices) {
  if (choices.empty()) fail(ErrorKind::NoData, "no parsed choices to score");
  const auto scfg = scoring_config(run.cfg);
  const bool strict = get_bool(run.cfg, "parse.strict");
  const auto by_generator = scoring::score_choices(corpus, bank, choices, scfg, tasks_of(run.cfg));
  std::vector<scoring::ScoreReport> reports;
  Json reports_json = Json::array();
  std::string images;
  for (const auto& [generator, list] : by_generator) {
    reports.push_back(strict ? scoring::aggregate_model_strict(list, generator)
                             : scoring::aggregate_model(list, generator));
    reports_json.push_back(scoring::to_json(reports.back()));
    for (const auto& img : list) images += dump_line(scoring::to_json(img)) + '\n';
  }
  run.write("scores.csv", scoring::reports_csv(reports, bank));
  run.write("scores.json", reports_json.dump(2) + "\n");
  run.write("images.jsonl", images);

  std::optional<report::MetricTable> external;
  if (const auto ext = get_string(run.cfg, "score.external"); !ext.empty()) {
    run.inputs.emplace_back("external", ext);
    external = report::read_metric_csv(ext);
  }
  auto lb = report::build_leaderboard(reports, external);
  report::RenderOptions ropts;
  ropts.intensity = get_bool(run.cfg, "score.intensity");
  const auto format = report::parse_format(get_string(run.cfg, "score.format"));
  const char* name = format == report::Format::Markdown ? "leaderboard.md"
                     : format == report::Format::Csv    ? "leaderboard.csv"
                                                        : "leaderboard.json";
  run.write(name, report::render(lb, format, ropts));
  return reports;
}

void cmd_curate(Run& run) {
  const corpus::Corpus corpus = load_corpus(run);
  const TaskKind task = parse_task(get_string(run.cfg, "curate.task"));
  const auto target = get_value(run.cfg, "curate.target").get<std::int64_t>();
  if (target < 0) fail(ErrorKind::Config, "curate.target must be non-negative");
  const auto prompts =
      corpus::curate(corpus.prompts(), corpus.annotation_map(), task, static_cast<std::size_t>(target));

  std::set<std::string> kept;
  for (const auto& p : prompts) kept.insert(p.prompt_id);
  std::vector<EntityAnnotation> annotations;
  for (const auto& a : corpus.annotations())
    if (kept.count(a.prompt_id)) annotations.push_back(a);
  std::vector<SampleRecord> samples;
  for (const auto& s : corpus.samples())
    if (kept.count(s.prompt_id)) samples.push_back(s);
  corpus::Corpus curated(prompts, std::move(annotations), std::move(samples));
  curated.set_base_dir(corpus.base_dir());

  run.write("curated_manifest.jsonl", jsonl_of(corpus::manifest_records(curated)));
  run.write("stats.json", corpus::to_json(corpus::dataset_stats(curated)).dump(2) + "\n");
  run.log << "curated " << prompts.size() << " " << to_string(task) << " prompts\n";
}

void cmd_evaluate(Run& run) {
  const corpus::Corpus corpus = load_corpus(run);
  const protocol::QuestionBank bank = load_bank(run);
  const auto tasks = tasks_of(run.cfg);
  auto bcfg = backend_config(run.cfg);
  if (!bcfg.script.empty()) run.inputs.emplace_back("script", bcfg.script);
  if (bcfg.kind == backend::BackendKind::Replay) run.inputs.emplace_back("replay", bcfg.replay_log);

  std::vector<const SampleRecord*> samples;
  for (const auto& s : corpus.samples()) samples.push_back(&s);
  std::sort(samples.begin(), samples.end(),
            [](const SampleRecord* a, const SampleRecord* b) { return a->sample_id < b->sample_id; });

  std::vector<protocol::RenderedInstruction> instrs;
  std::vector<parsing::FlaggedResponse> skipped;
  for (const SampleRecord* s : samples) {
    const EntityAnnotation& annotation = corpus.annotation_for(s->prompt_id);
    const std::string image = corpus.image_location(*s);
    for (TaskKind task : tasks) {
      for (const auto& q : bank.questions(task)) {
        if (!protocol::is_applicable(q, annotation)) continue;
        if (s->degraded) {
          skipped.push_back({s->sample_id, q.id, "", "ImageUnreadable: image not found: " + image});
          continue;
        }
        instrs.push_back(protocol::render(q, annotation, image, s->sample_id));
      }
    }
  }
  if (instrs.empty() && skipped.empty()) fail(ErrorKind::NoData, "nothing to evaluate");

  auto backend = backend::make_backend(bcfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto responses = backend::infer_batch(*backend, instrs, bcfg.max_concurrency);
  const double total_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  auto parsed = parsing::parse_batch(responses, bank, parse_config(run.cfg));
  parsed.flagged.insert(parsed.flagged.begin(), skipped.begin(), skipped.end());
  std::stable_sort(parsed.flagged.begin(), parsed.flagged.end(),
                   [](const parsing::FlaggedResponse& a, const parsing::FlaggedResponse& b) {
                     return std::tie(a.sample_id, a.question_id) < std::tie(b.sample_id, b.question_id);
                   });

  std::string responses_text, parsed_text, flagged_text, replay_text;
  Json latencies = Json::array();
  double max_ms = 0.0;
  for (const auto& r : responses) {
    responses_text += dump_line(response_json(r)) + '\n';
    latencies.push_back({{"sample_id", r.sample_id}, {"question_id", r.question_id}, {"latency_ms", r.latency_ms}});
    max_ms = std::max(max_ms, r.latency_ms);
  }
  for (const auto& c : parsed.parsed) parsed_text += dump_line(parsing::to_json(c)) + '\n';
  for (const auto& f : parsed.flagged) flagged_text += dump_line(parsing::to_json(f)) + '\n';
  for (const auto& e : backend::replay_entries(responses)) replay_text += dump_line(backend::to_json(e)) + '\n';

  run.write("responses.jsonl", responses_text);
  run.write("parsed.jsonl", parsed_text);
  run.write("flagged.jsonl", flagged_text);
  run.write("replay.jsonl", replay_text);
  Json timing = {{"requests", responses.size()},
                 {"total_ms", total_ms},
                 {"mean_latency_ms", responses.empty() ? 0.0 : total_ms / static_cast<double>(responses.size())},
                 {"max_latency_ms", max_ms},
                 {"method_counts", parsed.method_counts},
                 {"per_request", latencies}};
  run.write("timing.json", timing.dump(2) + "\n");

  run.log << "evaluated " << instrs.size() << " instructions: " << parsed.parsed.size() << " parsed, "
          << parsed.flagged.size() << " flagged\n";
  if (parsed.parsed.empty()) {
    run.log << "warning: no parsed choices, skipping scores\n";
    return;
  }
  write_scores(run, corpus, bank, parsed.parsed);
}

void cmd_score(Run& run) {
  const corpus::Corpus corpus = load_corpus(run);
  const protocol::QuestionBank bank = load_bank(run);
  std::vector<parsing::ParsedChoice> choices;
  for (const auto& line : read_jsonl(run.input("parsed", "score.parsed")))
    choices.push_back(parsing::parsed_choice_from_json(line.value, line.line));
  const auto reports = write_scores(run, corpus, bank, choices);
  run.log << scoring::reports_csv(reports, bank);
}

void cmd_correlate(Run& run) {
  const auto table = report::read_metric_csv(run.input("table", "correlate.table"));
  const std::string human = get_string(run.cfg, "correlate.human");
  table.column_index(human);
  std::vector<std::string> metrics;
  for (const auto& m : get_value(run.cfg, "correlate.metrics")) metrics.push_back(m.get<std::string>());
  if (metrics.empty())
    for (const auto& c : table.columns())
      if (c != human) metrics.push_back(c);
  std::map<std::string, report::ReportedValues> reported;
  if (!get_string(run.cfg, "correlate.reported").empty())
    reported = report::read_reported(run.input("reported", "correlate.reported"));
  for (const auto& [metric, values] : reported)
    if (!table.has_column(metric))
      fail(ErrorKind::ColumnMismatch, "reported values name unknown metric '" + metric + "'");

  report::CorrelationOptions opts;
  opts.tolerance = get_value(run.cfg, "correlate.tolerance").get<double>();
  opts.bootstrap_iterations = get_value(run.cfg, "correlate.bootstrap").get<std::size_t>();
  opts.seed = get_value(run.cfg, "seed").get<std::uint64_t>();
  const auto rep = report::correlation_report(table, human, metrics, reported, opts);
  const std::string md = report::correlation_markdown(rep);
  run.write("correlation.csv", report::correlation_csv(rep));
  run.write("correlation.json", report::to_json(rep).dump(2) + "\n");
  run.write("correlation.md", md);
  const auto format = report::parse_format(get_string(run.cfg, "correlate.format"));
  if (format == report::Format::Json)
    run.log << report::to_json(rep).dump(2) << "\n";
  else if (format == report::Format::Csv)
    run.log << report::correlation_csv(rep);
  else
    run.log << md;
}

void cmd_export_sft(Run& run) {
  const corpus::Corpus corpus = load_corpus(run);
  const protocol::QuestionBank bank = load_bank(run);
  const auto events = annotation::read_events(run.input("events", "export.events"));
  const auto triplets = corpus::export_sft(corpus, bank, events);
  run.write("sft.jsonl", corpus::sft_jsonl(triplets));
  run.log << "exported " << triplets.size() << " triplets\n";
}

void cmd_stats(Run& run) {
  const corpus::Corpus corpus = load_corpus(run);
  const std::string text = corpus::to_json(corpus::dataset_stats(corpus)).dump(2) + "\n";
  run.write("stats.json", text);
  run.log << text;
}

void cmd_serve(Run& run) {
  corpus::Corpus corpus = load_corpus(run);
  protocol::QuestionBank bank = load_bank(run);
  auto accounts = annosvc::load_accounts(run.input("accounts", "serve.accounts"));
  annosvc::ServiceOptions sopts;
  sopts.log_path = get_string(run.cfg, "serve.log");
  if (sopts.log_path.empty()) sopts.log_path = run.out / "events.jsonl";
  if (const auto snap = get_string(run.cfg, "serve.snapshot"); !snap.empty()) sopts.snapshot_path = snap;
  sopts.snapshot_every = get_value(run.cfg, "serve.snapshot_every").get<std::size_t>();
  annosvc::AnnotationService svc(std::move(corpus), std::move(bank), std::move(accounts), sopts);

  const std::string mode = get_string(run.cfg, "serve.assign");
  if (mode != "none" && !svc.has_assignments()) {
    annosvc::AssignPolicy policy;
    policy.mode = annosvc::parse_assign_mode(mode);
    policy.seed = get_value(run.cfg, "seed").get<std::uint64_t>();
    policy.round_index = get_value(run.cfg, "serve.round_index").get<int>();
    run.log << "assigned " << svc.assign(policy) << " (annotator, sample) pairs\n";
  }

  annosvc::HttpOptions hopts;
  hopts.host = get_string(run.cfg, "serve.host");
  hopts.port = get_value(run.cfg, "serve.port").get<int>();
  hopts.version = version();
  if (const auto dir = get_string(run.cfg, "serve.static_dir"); !dir.empty()) hopts.static_dir = dir;

  // Block the stop signals before the server thread starts so only sigwait
  // below receives them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  annosvc::HttpServer server(svc, hopts);
  const int port = server.start();
  run.write("serve.json", Json{{"host", hopts.host}, {"port", port}, {"pid", ::getpid()}}.dump() + "\n");
  run.log << "listening on http://" << hopts.host << ":" << port << std::endl;
  int sig = 0;
  sigwait(&stop_signals, &sig);
  server.stop();
  svc.write_snapshot();
  pthread_sigmask(SIG_UNBLOCK, &stop_signals, nullptr);
  run.log << "stopped\n";
}

void write_manifest(Run& run, const std::vector<std::string>& args, const std::optional<Error>& error) {
  Json inputs = Json::array();
  for (const auto& [role, path] : run.inputs) {
    Json j = {{"role", role}, {"path", path.string()}};
    std::error_code ec;
    if (fs::is_regular_file(path, ec)) j["sha256"] = sha256_file(path);
    inputs.push_back(std::move(j));
  }
  Json outputs = Json::array();
  for (const auto& path : run.outputs) {
    std::error_code ec;
    if (fs::is_regular_file(path, ec))
      outputs.push_back({{"path", path.filename().string()}, {"sha256", sha256_file(path)}});
  }
  Json manifest = {{"tool", "t2ieval"},
                   {"version", version()},
                   {"command", run.command},
                   {"args", args},
                   {"seed", run.cfg["seed"]},
                   {"config_sha256", sha256_hex(run.cfg.dump())},
                   {"inputs", inputs},
                   {"outputs", outputs}};
  if (error)
    manifest["status"] = {{"error", to_string(error->kind())}, {"message", error->what()}};
  else
    manifest["status"] = "ok";
  write_text(run.out / "run_manifest.json", manifest.dump(2) + "\n");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Text-to-image evaluation harness", "t2ieval"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", version());

  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir, backend_kind, mode, replay;
  bool strict_parse = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--set", sets, "Override a config key: section.key=value (repeatable)");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--backend", backend_kind, "Backend kind: mock, remote, replay");
  app.add_option("--mode", mode, "Aggregation mode (sum|mean) or, for serve, assignment mode (production|trial|none)");
  app.add_option("--replay", replay, "Replay log; implies --backend replay");
  app.add_flag("--strict-parse", strict_parse,
               "No fallback parse rule; a task counts for an image only if all its questions parsed");

  // Subcommand options map onto config keys.
  std::vector<std::pair<std::string, std::string>> keyed;  // key, raw value
  auto keyed_option = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&keyed, key](const std::string& v) { keyed.emplace_back(key, v); }, help);
  };

  auto* curate = app.add_subcommand("curate", "Filter prompts for a task into a curated manifest");
  keyed_option(curate, "--manifest", "corpus.manifest", "Corpus manifest (JSONL)");
  keyed_option(curate, "--task", "curate.task", "faithfulness or alignment");
  keyed_option(curate, "--target", "curate.target", "Number of prompts (0 keeps all)");

  auto* evaluate = app.add_subcommand("evaluate", "Render, query the backend, parse and score");
  keyed_option(evaluate, "--manifest", "corpus.manifest", "Corpus manifest (JSONL)");
  keyed_option(evaluate, "--protocol", "protocol.path", "Protocol file (default: built-in)");
  keyed_option(evaluate, "--script", "backend.script", "Mock backend script (JSONL)");
  keyed_option(evaluate, "--tasks", "evaluate.tasks", "Comma list of tasks");

  auto* score = app.add_subcommand("score", "Score parsed choices into per-model reports");
  keyed_option(score, "--manifest", "corpus.manifest", "Corpus manifest (JSONL)");
  keyed_option(score, "--protocol", "protocol.path", "Protocol file (default: built-in)");
  keyed_option(score, "--parsed", "score.parsed", "parsed.jsonl from evaluate");
  keyed_option(score, "--external", "score.external", "Extra metric CSV merged into the leaderboard");
  keyed_option(score, "--format", "score.format", "markdown, csv or json");

  auto* correlate = app.add_subcommand("correlate", "Correlate metric columns with human scores");
  keyed_option(correlate, "--table", "correlate.table", "Metric CSV, first column generator_id");
  keyed_option(correlate, "--human", "correlate.human", "Human column name");
  keyed_option(correlate, "--metrics", "correlate.metrics", "Comma list of metric columns");
  keyed_option(correlate, "--reported", "correlate.reported", "CSV of published values to check");
  keyed_option(correlate, "--tolerance", "correlate.tolerance", "Match tolerance");
  keyed_option(correlate, "--bootstrap", "correlate.bootstrap", "Bootstrap resamples (0 disables)");
  keyed_option(correlate, "--format", "correlate.format", "markdown, csv or json");

  auto* export_sft = app.add_subcommand("export-sft", "Export (question, image, answer) triplets");
  keyed_option(export_sft, "--manifest", "corpus.manifest", "Corpus manifest (JSONL)");
  keyed_option(export_sft, "--protocol", "protocol.path", "Protocol file (default: built-in)");
  keyed_option(export_sft, "--events", "export.events", "Annotation event log (JSONL)");

  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  keyed_option(serve, "--manifest", "corpus.manifest", "Corpus manifest (JSONL)");
  keyed_option(serve, "--protocol", "protocol.path", "Protocol file (default: built-in)");
  keyed_option(serve, "--accounts", "serve.accounts", "Accounts file (JSON)");
  keyed_option(serve, "--log", "serve.log", "Event log path (default: <out>/events.jsonl)");
  keyed_option(serve, "--snapshot", "serve.snapshot", "Snapshot path");
  keyed_option(serve, "--host", "serve.host", "Bind address");
  keyed_option(serve, "--port", "serve.port", "Port (0 picks a free one)");
  keyed_option(serve, "--static-dir", "serve.static_dir", "Web UI assets served at /");

  auto* stats = app.add_subcommand("stats", "Dataset statistics for a manifest");
  keyed_option(stats, "--manifest", "corpus.manifest", "Corpus manifest (JSONL)");

  std::vector<char*> argv;
  std::vector<std::string> storage(args);
  for (auto& a : storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : exit_code(ErrorKind::Usage);
  }

  CLI::App* sub = app.get_subcommands().front();
  std::optional<Run> run;
  try {
    Json cfg = default_config();
    if (!config_path.empty()) merge_config(cfg, read_config_file(config_path), config_path);
    for (const auto& s : sets) apply_override(cfg, s);
    for (const auto& [key, value] : keyed) apply_override(cfg, key + "=" + value);
    if (seed) set_value(cfg, "seed", *seed);
    if (out_dir) set_value(cfg, "out", *out_dir);
    if (backend_kind) set_value(cfg, "backend.kind", *backend_kind);
    if (replay) {
      set_value(cfg, "backend.kind", "replay");
      set_value(cfg, "backend.replay_log", *replay);
    }
    if (strict_parse) set_value(cfg, "parse.strict", true);
    if (mode) {
      if (sub->get_name() == "serve") {
        set_value(cfg, "serve.assign", *mode);
      } else {
        scoring::parse_mode(*mode);
        set_value(cfg, "score.faithfulness_mode", *mode);
        set_value(cfg, "score.alignment_mode", *mode);
      }
    }

    run.emplace(Run{sub->get_name(), cfg, get_string(cfg, "out"), out, {}, {}});
    if (!config_path.empty()) run->inputs.emplace_back("config", config_path);
    fs::create_directories(run->out);
    write_text(run->out / "resolved_config.json", cfg.dump(2) + "\n");

    const std::string& name = run->command;
    if (name == "curate") cmd_curate(*run);
    else if (name == "evaluate") cmd_evaluate(*run);
    else if (name == "score") cmd_score(*run);
    else if (name == "correlate") cmd_correlate(*run);
    else if (name == "export-sft") cmd_export_sft(*run);
    else if (name == "serve") cmd_serve(*run);
    else if (name == "stats") cmd_stats(*run);
    write_manifest(*run, args, std::nullopt);
    return 0;
  } catch (const Error& e) {
    err << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
    if (run) {
      try {
        write_manifest(*run, args, e);
      } catch (const std::exception&) {
      }
    }
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error[Io]: " << e.what() << "\n";
    return exit_code(ErrorKind::Io);
  } catch (const std::exception& e) {
    err << "error[Internal]: " << e.what() << "\n";
    return exit_code(ErrorKind::Internal);
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace t2ieval::cli
