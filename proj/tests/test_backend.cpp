// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <httplib.h>

#include <fstream>
#include <thread>

#include "t2ieval/backend.hpp"
#include "t2ieval/hashing.hpp"
#include "test_util.hpp"

namespace t2ieval::backend {
namespace {

using protocol::RenderedInstruction;
using testing::TempDir;
using Script = std::map<std::pair<std::string, std::string>, MockBackend::Entry>;

RenderedInstruction instr(std::string sample, std::string q = "faith.hand", std::string image = "https://img/x.png") {
  RenderedInstruction r;
  r.sample_id = std::move(sample);
  r.question_id = std::move(q);
  r.final_text = "question text for " + r.sample_id;
  r.image_ref = std::move(image);
  return r;
}

TEST(Backend, MockScripted) {
  MockBackend mock("m", 32, {{{"s1", "faith.hand"}, {"2", FinishReason::Stop}}});
  auto r = mock.infer(instr("s1"));
  EXPECT_EQ(r.raw_text, "2");
  EXPECT_EQ(r.finish_reason, FinishReason::Stop);
  EXPECT_FALSE(r.request_hash.empty());
  EXPECT_ERROR_KIND(mock.infer(instr("s2")), ErrorKind::BackendRefused);
}

TEST(Backend, MockWildcardAndTruncation) {
  MockBackend mock("m", 3, {{{"*", "faith.hand"}, {"one two three four five", FinishReason::Stop}}});
  auto r = mock.infer(instr("anything"));
  EXPECT_EQ(r.raw_text, "one two three");
  EXPECT_EQ(r.finish_reason, FinishReason::Length);
}

TEST(Backend, MockScriptFile) {
  auto script = MockBackend::load_script(testing::fixture("e2e/script.jsonl"));
  ASSERT_TRUE(script.count({"sA1", "faith.body"}));
  EXPECT_EQ(script.at({"sA1", "faith.body"}).response, "5");
}

TEST(Backend, ImageDigest) {
  TempDir dir;
  std::ofstream(dir / "a.png", std::ios::binary) << "bytes";
  EXPECT_EQ(image_digest((dir / "a.png").string()), sha256_hex("bytes"));
  EXPECT_ERROR_KIND(image_digest((dir / "none.png").string()), ErrorKind::ImageUnreadable);
  EXPECT_NE(request_hash("m", instr("a"), "d"), request_hash("m2", instr("a"), "d"));
  EXPECT_EQ(request_hash("m", instr("a"), "d"), request_hash("m", instr("a"), "d"));
}

TEST(Backend, ReplayReproducesWithoutCallingBackend) {
  MockBackend mock("m", 32, {{{"*", "faith.hand"}, {"4", FinishReason::Stop}}, {{"*", "faith.face"}, {"x", FinishReason::Error}}});
  std::vector<RenderedInstruction> batch = {instr("a"), instr("b"), instr("c", "faith.face")};
  auto recorded = infer_batch(mock, batch, 2);
  auto entries = replay_entries(recorded);
  EXPECT_EQ(entries.size(), 2u);  // the error is not recorded

  TempDir dir;
  std::vector<Json> lines;
  for (const auto& e : entries) lines.push_back(to_json(e));
  write_jsonl(dir / "replay.jsonl", lines);
  ReplayBackend replay("m", read_replay_log(dir / "replay.jsonl"));
  for (int i = 0; i < 2; ++i) {
    auto r = replay.infer(batch[static_cast<std::size_t>(i)]);
    EXPECT_EQ(r.raw_text, recorded[static_cast<std::size_t>(i)].raw_text);
    EXPECT_EQ(r.request_hash, recorded[static_cast<std::size_t>(i)].request_hash);
  }
  EXPECT_ERROR_KIND(replay.infer(instr("zzz")), ErrorKind::ReplayMiss);
  ReplayBackend other_model("m2", entries);
  EXPECT_ERROR_KIND(other_model.infer(batch[0]), ErrorKind::ReplayMiss);
}

TEST(Backend, CachingBackendPersists) {
  TempDir dir;
  auto path = dir / "cache.jsonl";
  auto make = [&] {
    auto inner = std::make_unique<MockBackend>("m", 32, Script{{{"*", "faith.hand"}, {"3", FinishReason::Stop}}});
    return std::make_unique<CachingBackend>(std::move(inner), "m", path);
  };
  auto first = make();
  first->infer(instr("a"));
  first->infer(instr("a"));
  EXPECT_EQ(first->hits(), 1);
  auto second = make();
  EXPECT_EQ(second->infer(instr("a")).raw_text, "3");
  EXPECT_EQ(second->hits(), 1);
}

TEST(Backend, BatchOrderAndConcurrencyBound) {
  MockBackend mock("m", 32, {{{"*", "faith.hand"}, {"1", FinishReason::Stop}}}, 20);
  std::vector<RenderedInstruction> batch;
  for (int i = 0; i < 10; ++i) batch.push_back(instr("s" + std::to_string(i)));
  auto out = infer_batch(mock, batch, 3);
  ASSERT_EQ(out.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(out[static_cast<std::size_t>(i)].sample_id, "s" + std::to_string(i));
  EXPECT_LE(mock.max_in_flight(), 3);
  EXPECT_GE(mock.max_in_flight(), 1);
}

TEST(Backend, BatchOfOneEqualsInfer) {
  MockBackend mock("m", 32, {{{"*", "faith.hand"}, {"2", FinishReason::Stop}}});
  std::vector<RenderedInstruction> one = {instr("a")};
  auto batch = infer_batch(mock, one, 4);
  auto single = mock.infer(instr("a"));
  ASSERT_EQ(batch.size(), 1u);
  EXPECT_EQ(batch[0].raw_text, single.raw_text);
  EXPECT_EQ(batch[0].request_hash, single.request_hash);
}

TEST(Backend, FailuresStayInSlot) {
  MockBackend mock("m", 32, {{{"*", "faith.hand"}, {"2", FinishReason::Stop}}});
  std::vector<RenderedInstruction> batch = {instr("a"), instr("b"), instr("c", "faith.face"), instr("d"), instr("e")};
  auto out = infer_batch(mock, batch, 2);
  int errors = 0;
  for (const auto& r : out) errors += r.finish_reason == FinishReason::Error;
  EXPECT_EQ(errors, 1);
  EXPECT_EQ(out[2].finish_reason, FinishReason::Error);
  EXPECT_EQ(out[2].error_kind, ErrorKind::BackendRefused);
}

TEST(Backend, ConfigValidation) {
  BackendConfig cfg;
  EXPECT_ERROR_KIND(validate(cfg), ErrorKind::Config);  // mock without script
  cfg.kind = BackendKind::Remote;
  EXPECT_ERROR_KIND(validate(cfg), ErrorKind::Config);
  cfg.endpoint = "http://127.0.0.1:1/v1";
  EXPECT_NO_THROW(validate(cfg));
  cfg.max_concurrency = 0;
  EXPECT_ERROR_KIND(validate(cfg), ErrorKind::Config);
  EXPECT_ERROR_KIND(parse_backend_kind("gpu"), ErrorKind::Config);
}

// Minimal chat-completions endpoint on an ephemeral port.
class FakeServer {
 public:
  explicit FakeServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_body = req.body;
      handler(req, res);
    });
    port = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  BackendConfig config() const {
    BackendConfig cfg;
    cfg.kind = BackendKind::Remote;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    cfg.model = "fake";
    cfg.retry_backoff_ms = 1;
    cfg.max_retries = 2;
    cfg.timeout_s = 5;
    return cfg;
  }

  int port = 0;
  std::atomic<int> hits{0};
  std::string last_body;

 private:
  httplib::Server server_;
  std::thread thread_;
};

std::string completion(const std::string& text, const std::string& reason = "stop") {
  return Json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}, {"finish_reason", reason}}}}}.dump();
}

TEST(RemoteBackend, SendsDataUrlAndParsesReply) {
  TempDir dir;
  std::ofstream(dir / "img.png", std::ios::binary) << "PNGDATA";
  FakeServer fake([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("Option 3"), "application/json");
  });
  RemoteBackend remote(fake.config());
  auto r = remote.infer(instr("s", "faith.hand", (dir / "img.png").string()));
  EXPECT_EQ(r.raw_text, "Option 3");
  EXPECT_EQ(r.finish_reason, FinishReason::Stop);
  auto body = Json::parse(fake.last_body);
  EXPECT_EQ(body["model"], "fake");
  EXPECT_EQ(body["max_tokens"], 32);
  const auto& content = body["messages"][0]["content"];
  EXPECT_EQ(content[0]["image_url"]["url"], "data:image/png;base64," + base64_encode("PNGDATA"));
  EXPECT_EQ(content[1]["text"], "question text for s");
}

TEST(RemoteBackend, RetriesTransientFailures) {
  std::atomic<int> n{0};
  FakeServer fake([&](const httplib::Request&, httplib::Response& res) {
    int k = n++;
    if (k == 0) {
      res.status = 429;
    } else if (k == 1) {
      res.status = 503;
    } else {
      res.set_content(completion("2", "length"), "application/json");
    }
  });
  RemoteBackend remote(fake.config());
  auto r = remote.infer(instr("s"));
  EXPECT_EQ(r.raw_text, "2");
  EXPECT_EQ(r.finish_reason, FinishReason::Length);
  EXPECT_EQ(remote.attempts(), 3);
}

TEST(RemoteBackend, GivesUpAfterRetries) {
  FakeServer fake([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  auto cfg = fake.config();
  RemoteBackend remote(cfg);
  EXPECT_ERROR_KIND(remote.infer(instr("s")), ErrorKind::Transport);
  EXPECT_EQ(fake.hits.load(), cfg.max_retries + 1);
}

TEST(RemoteBackend, NonRetryableStatusIsRefusal) {
  FakeServer fake([](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("bad image", "text/plain");
  });
  RemoteBackend remote(fake.config());
  try {
    remote.infer(instr("s"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BackendRefused);
    EXPECT_NE(std::string(e.what()).find("bad image"), std::string::npos);
  }
  EXPECT_EQ(fake.hits.load(), 1);
}

TEST(RemoteBackend, UnreachableEndpoint) {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  BackendConfig cfg;
  cfg.kind = BackendKind::Remote;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.max_retries = 2;
  cfg.retry_backoff_ms = 1;
  cfg.timeout_s = 0.3;
  RemoteBackend remote(cfg);
  EXPECT_ERROR_KIND(remote.infer(instr("s")), ErrorKind::Transport);
  EXPECT_EQ(remote.attempts(), 3);
}

}  // namespace
}  // namespace t2ieval::backend
