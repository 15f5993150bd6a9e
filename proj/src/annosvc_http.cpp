// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include "t2ieval/annosvc_http.hpp"

#include <httplib.h>

#include <charconv>
#include <thread>

#include "t2ieval/errors.hpp"
#include "t2ieval/hashing.hpp"

namespace t2ieval::annosvc {

namespace {

std::string mime_for(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  if (ext == ".bmp") return "image/bmp";
  return "application/octet-stream";
}

void send_json(httplib::Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorKind kind, const std::string& message) {
  send_json(res, {{"error", {{"kind", to_string(kind)}, {"message", message}}}}, http_status(kind));
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    Json j = Json::parse(req.body);
    if (!j.is_object()) fail(ErrorKind::Schema, "request body must be a JSON object");
    return j;
  } catch (const Json::exception& e) {
    fail(ErrorKind::Schema, std::string("malformed JSON body: ") + e.what());
  }
}

std::optional<std::uint64_t> base_event(const Json& body) {
  if (!body.contains("base_event_id") || body["base_event_id"].is_null()) return std::nullopt;
  if (!body["base_event_id"].is_number_unsigned() && !body["base_event_id"].is_number_integer())
    fail(ErrorKind::Schema, "base_event_id must be an integer");
  return body["base_event_id"].get<std::uint64_t>();
}

std::string body_string(const Json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string())
    fail(ErrorKind::Schema, std::string("body field '") + key + "' must be a string");
  return body[key].get<std::string>();
}

Json result_json(const RecordResult& r) {
  Json j = {{"event_id", r.event_id}, {"status", to_string(r.status)}, {"stale", r.stale}};
  if (r.stale) j["warning"] = "another write to this sample landed first; this write replaced it";
  if (r.reassigned_to) j["reassigned_to"] = *r.reassigned_to;
  return j;
}

std::uint64_t uint_param(const httplib::Request& req, const char* key, std::uint64_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  std::uint64_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty())
    fail(ErrorKind::Usage, std::string("query parameter '") + key + "' must be a non-negative integer");
  return out;
}

std::string bearer(const httplib::Request& req) {
  const std::string h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.compare(0, prefix.size(), prefix) == 0) return h.substr(prefix.size());
  return {};
}

}  // namespace

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Unauthorized: return 401;
    case ErrorKind::Forbidden: return 403;
    case ErrorKind::NotFound:
    case ErrorKind::DanglingReference: return 404;
    case ErrorKind::IllegalTransition:
    case ErrorKind::IncompleteRound: return 409;
    case ErrorKind::Usage:
    case ErrorKind::Schema:
    case ErrorKind::Config: return 400;
    case ErrorKind::NoData:
    case ErrorKind::DegenerateAgreement: return 422;
    default: return 500;
  }
}

Json sample_payload(const AnnotationService& svc, const SampleRecord& sample,
                    const std::optional<AssignmentEntry>& entry) {
  const PromptRecord* prompt = svc.corpus().find_prompt(sample.prompt_id);
  const EntityAnnotation& annotation = svc.corpus().annotation_for(sample.prompt_id);
  Json questions = Json::array();
  for (const auto* q : sample_questions(svc.corpus(), svc.bank(), sample)) {
    Json options = Json::array();
    for (const auto& o : q->options) options.push_back({{"label", o.label}, {"text", o.text}});
    Json jq = {{"question_id", q->id},
               {"text", protocol::fill_template(*q, annotation)},
               {"options", options}};
    jq["not_applicable_label"] = q->not_applicable_label ? Json(*q->not_applicable_label) : Json(nullptr);
    questions.push_back(std::move(jq));
  }
  Json j = {{"sample_id", sample.sample_id},
            {"prompt_id", sample.prompt_id},
            {"prompt_text", prompt ? prompt->text : std::string()},
            {"task", prompt ? std::string(to_string(prompt->task)) : std::string()},
            {"image_url", "/api/samples/" + sample.sample_id + "/image"},
            {"questions", questions}};
  if (entry) {
    j["status"] = to_string(entry->status);
    j["answers"] = entry->drafts;
    j["last_event_id"] = entry->last_event_id;
    if (entry->note) j["note"] = *entry->note;
  } else {
    j["status"] = nullptr;
    j["answers"] = Json::object();
    j["last_event_id"] = 0;
  }
  return j;
}

struct HttpServer::Impl {
  AnnotationService& svc;
  HttpOptions opts;
  httplib::Server server;
  std::thread thread;
  int bound_port = -1;

  Impl(AnnotationService& s, HttpOptions o) : svc(s), opts(std::move(o)) { routes(); }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  using AuthedHandler = std::function<void(const Account&, const httplib::Request&, httplib::Response&)>;

  static Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        send_error(res, e.kind(), e.what());
      } catch (const std::exception& e) {
        send_error(res, ErrorKind::Internal, e.what());
      }
    };
  }

  Handler authed(AuthedHandler h) {
    return guarded([this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      const Account& who = svc.authenticate(bearer(req));
      h(who, req, res);
    });
  }

  void routes() {
    server.Get("/api/health", guarded([this](const httplib::Request&, httplib::Response& res) {
                 send_json(res, {{"status", "ok"}, {"version", opts.version}});
               }));

    server.Post("/api/login", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  Json body = parse_body(req);
                  const Account& who = svc.authenticate(body_string(body, "token"));
                  if (body.contains("annotator_id") && body["annotator_id"] != who.id)
                    fail(ErrorKind::Unauthorized, "token does not belong to this account");
                  send_json(res, {{"annotator_id", who.id}, {"role", to_string(who.role)}, {"token", who.token}});
                }));

    server.Get("/api/assignments",
               authed([this](const Account& who, const httplib::Request&, httplib::Response& res) {
                 Json items = Json::array();
                 for (const auto& [sample, entry] : svc.assignments(who.id)) {
                   Json j = {{"sample_id", sample},
                             {"status", to_string(entry.status)},
                             {"last_event_id", entry.last_event_id}};
                   if (entry.round_index) j["round_index"] = *entry.round_index;
                   items.push_back(std::move(j));
                 }
                 send_json(res, {{"annotator_id", who.id}, {"items", items}});
               }));

    server.Get("/api/samples/:id",
               authed([this](const Account& who, const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.path_params.at("id");
                 const SampleRecord* s = svc.corpus().find_sample(id);
                 if (!s) fail(ErrorKind::NotFound, "unknown sample '" + id + "'");
                 auto entry = svc.entry(who.id, id);
                 if (!entry && who.role != Role::Inspector)
                   fail(ErrorKind::Forbidden, "sample '" + id + "' is not assigned to '" + who.id + "'");
                 send_json(res, sample_payload(svc, *s, entry));
               }));

    server.Get("/api/samples/:id/image",
               authed([this](const Account& who, const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.path_params.at("id");
                 const SampleRecord* s = svc.corpus().find_sample(id);
                 if (!s) fail(ErrorKind::NotFound, "unknown sample '" + id + "'");
                 if (who.role != Role::Inspector && !svc.entry(who.id, id))
                   fail(ErrorKind::Forbidden, "sample '" + id + "' is not assigned to '" + who.id + "'");
                 const std::string where = svc.corpus().image_location(*s);
                 if (corpus::is_remote_uri(where) && where.rfind("data:", 0) != 0) {
                   res.set_redirect(where);
                   return;
                 }
                 if (corpus::is_remote_uri(where)) fail(ErrorKind::NotFound, "inline image is not served");
                 std::error_code ec;
                 if (!std::filesystem::is_regular_file(where, ec))
                   fail(ErrorKind::NotFound, "image for '" + id + "' is missing");
                 res.set_content(read_text(where), mime_for(where));
               }));

    server.Post("/api/samples/:id/answers",
                authed([this](const Account& who, const httplib::Request& req, httplib::Response& res) {
                  Json body = parse_body(req);
                  if (!body.contains("option_label") || !body["option_label"].is_number_integer())
                    fail(ErrorKind::Schema, "body field 'option_label' must be an integer");
                  auto r = svc.save(who, req.path_params.at("id"), body_string(body, "question_id"),
                                    body["option_label"].get<int>(), base_event(body));
                  send_json(res, result_json(r));
                }));

    server.Post("/api/samples/:id/submit",
                authed([this](const Account& who, const httplib::Request& req, httplib::Response& res) {
                  Json body = parse_body(req);
                  send_json(res, result_json(svc.submit(who, req.path_params.at("id"), base_event(body))));
                }));

    server.Post("/api/samples/:id/report",
                authed([this](const Account& who, const httplib::Request& req, httplib::Response& res) {
                  Json body = parse_body(req);
                  std::string note = body.contains("note") && body["note"].is_string() ? body["note"].get<std::string>()
                                                                                       : std::string();
                  send_json(res, result_json(svc.report(who, req.path_params.at("id"), note)));
                }));

    server.Get("/api/review/worklist",
               authed([this](const Account& who, const httplib::Request& req, httplib::Response& res) {
                 if (who.role != Role::Inspector) fail(ErrorKind::Forbidden, "'" + who.id + "' is not an inspector");
                 std::uint64_t seed = uint_param(req, "seed", 0);
                 Worklist w;
                 if (req.has_param("fraction"))
                   w = svc.inspect_fraction(parse_double(req.get_param_value("fraction")), seed);
                 else
                   w = svc.inspect_sample(uint_param(req, "count", 1000), seed);
                 Json items = Json::array();
                 for (const auto& it : w.items)
                   items.push_back({{"sample_id", it.sample_id}, {"annotator_id", it.annotator_id}, {"answers", it.answers}});
                 Json out = {{"items", items}, {"available", w.available}};
                 if (w.warning) out["warning"] = *w.warning;
                 send_json(res, out);
               }));

    server.Post("/api/review/:id/accept",
                authed([this](const Account& who, const httplib::Request& req, httplib::Response& res) {
                  Json body = parse_body(req);
                  send_json(res, result_json(svc.review_accept(who, req.path_params.at("id"),
                                                               body_string(body, "annotator_id"))));
                }));

    server.Post("/api/review/:id/reject",
                authed([this](const Account& who, const httplib::Request& req, httplib::Response& res) {
                  Json body = parse_body(req);
                  std::optional<std::string> note;
                  if (body.contains("note") && body["note"].is_string()) note = body["note"].get<std::string>();
                  send_json(res, result_json(svc.review_reject(who, req.path_params.at("id"),
                                                               body_string(body, "annotator_id"), note)));
                }));

    server.Get("/api/dashboard", authed([this](const Account&, const httplib::Request&, httplib::Response& res) {
                 send_json(res, svc.dashboard());
               }));

    server.Get("/api/export/sft",
               authed([this](const Account& who, const httplib::Request&, httplib::Response& res) {
                 if (who.role != Role::Inspector) fail(ErrorKind::Forbidden, "'" + who.id + "' is not an inspector");
                 res.set_content(svc.export_sft_jsonl(), "application/x-ndjson");
               }));

    if (opts.static_dir) {
      if (!server.set_mount_point("/", opts.static_dir->string()))
        fail(ErrorKind::Config, "static directory " + opts.static_dir->string() + " does not exist");
    }
  }

  void bind() {
    if (opts.port == 0)
      bound_port = server.bind_to_any_port(opts.host);
    else
      bound_port = server.bind_to_port(opts.host, opts.port) ? opts.port : -1;
    if (bound_port < 0)
      fail(ErrorKind::Io, "cannot bind " + opts.host + ":" + std::to_string(opts.port));
  }
};

HttpServer::HttpServer(AnnotationService& service, HttpOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  impl_->bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->bound_port;
}

void HttpServer::run() {
  impl_->bind();
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int HttpServer::port() const { return impl_->bound_port; }

}  // namespace t2ieval::annosvc
