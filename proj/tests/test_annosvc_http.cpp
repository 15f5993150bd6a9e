// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <httplib.h>

#include <fstream>

#include "t2ieval/annosvc_http.hpp"
#include "test_util.hpp"

namespace t2ieval::annosvc {
namespace {

using testing::TempDir;

class HttpApi : public ::testing::Test {
 protected:
  void SetUp() override {
    std::ofstream(dir / "local.png", std::ios::binary) << "\x89PNG-bytes";
    std::filesystem::create_directories(dir / "static");
    std::ofstream(dir / "static/index.html") << "<html>ui</html>";
    std::ofstream(dir / "manifest.jsonl")
        << R"({"type":"prompt","prompt_id":"p1","text":"a man with a red umbrella","task":"faithfulness"})" "\n"
        << R"({"type":"annotation","prompt_id":"p1","objects":["man","umbrella"],"categories":{"man":"human"}})" "\n"
        << R"({"type":"prompt","prompt_id":"p2","text":"two cats on a mat","task":"alignment"})" "\n"
        << R"({"type":"annotation","prompt_id":"p2","objects":["cat","mat"],"counts":[{"entity":"cat","count":2}]})" "\n"
        << R"({"type":"sample","sample_id":"s1","prompt_id":"p1","generator_id":"g","image_uri":"local.png"})" "\n"
        << R"({"type":"sample","sample_id":"s2","prompt_id":"p2","generator_id":"g","image_uri":"https://img.invalid/2.png"})" "\n";
    std::vector<Account> accounts = {{"alice", "tok-a", Role::Annotator},
                                     {"bob", "tok-b", Role::Annotator},
                                     {"ivy", "tok-i", Role::Inspector}};
    ServiceOptions o;
    o.log_path = dir / "events.jsonl";
    o.snapshot_every = 0;
    svc = std::make_unique<AnnotationService>(corpus::ingest_manifest(dir / "manifest.jsonl"),
                                              protocol::builtin_banks(), accounts, o);
    svc->assign({AssignMode::Production, 0, 0}, {"s1", "s2"}, {"alice"});
    HttpOptions h;
    h.port = 0;
    h.static_dir = dir / "static";
    h.version = "test";
    server = std::make_unique<HttpServer>(*svc, h);
    port = server->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  void TearDown() override { server->stop(); }

  httplib::Result get(const std::string& path, const std::string& token) {
    return client->Get(path, {{"Authorization", "Bearer " + token}});
  }
  httplib::Result post(const std::string& path, const std::string& token, const Json& body) {
    return client->Post(path, {{"Authorization", "Bearer " + token}}, body.dump(), "application/json");
  }
  static Json json(const httplib::Result& r) { return Json::parse(r->body); }

  TempDir dir;
  std::unique_ptr<AnnotationService> svc;
  std::unique_ptr<HttpServer> server;
  std::unique_ptr<httplib::Client> client;
  int port = 0;
};

TEST(HttpStatus, Mapping) {
  EXPECT_EQ(http_status(ErrorKind::Unauthorized), 401);
  EXPECT_EQ(http_status(ErrorKind::Forbidden), 403);
  EXPECT_EQ(http_status(ErrorKind::NotFound), 404);
  EXPECT_EQ(http_status(ErrorKind::IllegalTransition), 409);
  EXPECT_EQ(http_status(ErrorKind::Schema), 400);
  EXPECT_EQ(http_status(ErrorKind::NoData), 422);
  EXPECT_EQ(http_status(ErrorKind::Io), 500);
}

TEST_F(HttpApi, HealthAndLogin) {
  auto h = client->Get("/api/health");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(json(h)["version"], "test");
  auto ok = client->Post("/api/login", R"({"token":"tok-a"})", "application/json");
  EXPECT_EQ(ok->status, 200);
  EXPECT_EQ(json(ok)["annotator_id"], "alice");
  EXPECT_EQ(json(ok)["role"], "annotator");
  auto bad = client->Post("/api/login", R"({"token":"nope"})", "application/json");
  EXPECT_EQ(bad->status, 401);
  EXPECT_EQ(json(bad)["error"]["kind"], "Unauthorized");
  auto mismatch = client->Post("/api/login", R"({"token":"tok-a","annotator_id":"bob"})", "application/json");
  EXPECT_EQ(mismatch->status, 401);
  auto malformed = client->Post("/api/login", "{not json", "application/json");
  EXPECT_EQ(malformed->status, 400);
  EXPECT_EQ(client->Get("/api/assignments")->status, 401);
}

TEST_F(HttpApi, AssignmentsAndSamplePayload) {
  auto r = get("/api/assignments", "tok-a");
  ASSERT_EQ(r->status, 200);
  auto items = json(r)["items"];
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[0]["sample_id"], "s1");
  EXPECT_EQ(items[0]["status"], "pending");
  EXPECT_TRUE(json(get("/api/assignments", "tok-b"))["items"].empty());

  auto s = get("/api/samples/s1", "tok-a");
  ASSERT_EQ(s->status, 200);
  auto p = json(s);
  EXPECT_EQ(p["task"], "faithfulness");
  EXPECT_EQ(p["image_url"], "/api/samples/s1/image");
  ASSERT_EQ(p["questions"].size(), 5u);
  EXPECT_EQ(p["questions"][0]["question_id"], "faith.body");
  EXPECT_EQ(p["questions"][0]["not_applicable_label"], 0);
  EXPECT_EQ(p["questions"][0]["options"].size(), 6u);
  EXPECT_TRUE(p["questions"][3]["not_applicable_label"].is_null());

  auto s2 = json(get("/api/samples/s2", "tok-a"));
  ASSERT_EQ(s2["questions"].size(), 2u);  // object and count are annotated
  EXPECT_NE(s2["questions"][1]["text"].get<std::string>().find("cat: 2."), std::string::npos);

  EXPECT_EQ(get("/api/samples/s1", "tok-b")->status, 403);
  EXPECT_EQ(get("/api/samples/s1", "tok-i")->status, 200);  // inspectors may look
  EXPECT_EQ(get("/api/samples/zz", "tok-a")->status, 404);
}

TEST_F(HttpApi, ImageRoute) {
  auto local = get("/api/samples/s1/image", "tok-a");
  ASSERT_EQ(local->status, 200);
  EXPECT_EQ(local->body, "\x89PNG-bytes");
  EXPECT_EQ(local->get_header_value("Content-Type"), "image/png");
  auto remote = get("/api/samples/s2/image", "tok-a");
  EXPECT_EQ(remote->status, 302);
  EXPECT_EQ(remote->get_header_value("Location"), "https://img.invalid/2.png");
  EXPECT_EQ(get("/api/samples/s1/image", "tok-b")->status, 403);
}

TEST_F(HttpApi, AnswerSubmitReviewExport) {
  auto first = post("/api/samples/s2/answers", "tok-a", {{"question_id", "align.object"}, {"option_label", 3}});
  ASSERT_EQ(first->status, 200) << first->body;
  EXPECT_EQ(json(first)["status"], "in_progress");
  EXPECT_FALSE(json(first)["stale"]);
  auto base = json(first)["event_id"].get<std::uint64_t>();

  auto second = post("/api/samples/s2/answers", "tok-a",
                     {{"question_id", "align.count"}, {"option_label", 2}, {"base_event_id", base}});
  EXPECT_FALSE(json(second)["stale"]);
  auto stale = post("/api/samples/s2/answers", "tok-a",
                    {{"question_id", "align.count"}, {"option_label", 3}, {"base_event_id", base}});
  EXPECT_TRUE(json(stale)["stale"]);
  EXPECT_TRUE(json(stale).contains("warning"));

  EXPECT_EQ(post("/api/samples/s2/answers", "tok-a", {{"question_id", "align.color"}, {"option_label", 1}})->status, 409);
  EXPECT_EQ(post("/api/samples/s2/answers", "tok-a", {{"question_id", "align.object"}})->status, 400);
  EXPECT_EQ(post("/api/samples/s2/answers", "tok-b", {{"question_id", "align.object"}, {"option_label", 1}})->status, 403);

  auto saved = json(get("/api/samples/s2", "tok-a"));
  EXPECT_EQ(saved["answers"]["align.count"], 3);

  auto submit = post("/api/samples/s2/submit", "tok-a", Json::object());
  ASSERT_EQ(submit->status, 200);
  EXPECT_EQ(json(submit)["status"], "completed");
  EXPECT_EQ(post("/api/samples/s2/submit", "tok-a", Json::object())->status, 409);

  EXPECT_EQ(get("/api/review/worklist?count=5", "tok-a")->status, 403);
  auto work = get("/api/review/worklist?count=5&seed=1", "tok-i");
  ASSERT_EQ(work->status, 200);
  EXPECT_EQ(json(work)["items"].size(), 1u);
  EXPECT_TRUE(json(work).contains("warning"));
  EXPECT_EQ(get("/api/review/worklist?count=abc", "tok-i")->status, 400);
  EXPECT_EQ(get("/api/review/worklist?fraction=2", "tok-i")->status, 400);

  EXPECT_EQ(get("/api/export/sft", "tok-a")->status, 403);
  auto exported = get("/api/export/sft", "tok-i");
  ASSERT_EQ(exported->status, 200);
  EXPECT_EQ(exported->get_header_value("Content-Type"), "application/x-ndjson");
  EXPECT_EQ(exported->body, svc->export_sft_jsonl());
  EXPECT_EQ(std::count(exported->body.begin(), exported->body.end(), '\n'), 2);

  auto rej = post("/api/review/s2/reject", "tok-i", {{"annotator_id", "alice"}, {"note", "count wrong"}});
  ASSERT_EQ(rej->status, 200) << rej->body;
  EXPECT_EQ(json(rej)["reassigned_to"], "bob");
  EXPECT_EQ(json(get("/api/assignments", "tok-b"))["items"][0]["status"], "re_annotate");
  EXPECT_EQ(post("/api/review/s2/accept", "tok-i", {{"annotator_id", "alice"}})->status, 403);
  EXPECT_EQ(get("/api/export/sft", "tok-i")->body, "");
}

TEST_F(HttpApi, ReportAndDashboard) {
  EXPECT_EQ(post("/api/samples/s1/report", "tok-a", {{"note", ""}})->status, 409);
  auto r = post("/api/samples/s1/report", "tok-a", {{"note", "NSFW"}});
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json(r)["status"], "reported");
  EXPECT_EQ(json(get("/api/samples/s1", "tok-a"))["note"], "NSFW");
  auto d = get("/api/dashboard", "tok-i");
  ASSERT_EQ(d->status, 200);
  auto dash = json(d);
  EXPECT_EQ(dash["annotators"].size(), 2u);
  EXPECT_GE(dash["events"].get<int>(), 3);
}

TEST_F(HttpApi, StaticFiles) {
  auto r = client->Get("/index.html");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, "<html>ui</html>");
  EXPECT_EQ(client->Get("/missing.js")->status, 404);
}

}  // namespace
}  // namespace t2ieval::annosvc
