// Copyright 2026 The t2ieval Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "t2ieval/annotation_event.hpp"
#include "test_util.hpp"

namespace t2ieval::annotation {
namespace {

AnnotationEvent ev(std::uint64_t id, std::string who, std::string sample, Action action,
                   std::optional<std::string> q = {}, std::optional<int> label = {}) {
  AnnotationEvent e;
  e.event_id = id;
  e.annotator_id = std::move(who);
  e.sample_id = std::move(sample);
  e.action = action;
  e.question_id = std::move(q);
  e.option_label = label;
  return e;
}

TEST(AnnotationEvent, JsonRoundTrip) {
  auto e = ev(7, "a", "s", Action::ReviewReject);
  e.note = "blurry";
  e.target_annotator = "b";
  e.round_index = 2;
  e.timestamp_ms = 1234;
  EXPECT_EQ(event_from_json(to_json(e)), e);
  for (Action a : {Action::Assign, Action::Save, Action::Submit, Action::Report, Action::ReviewAccept,
                   Action::ReviewReject})
    EXPECT_EQ(parse_action(to_string(a)), a);
  EXPECT_ERROR_KIND(parse_action("delete"), ErrorKind::Schema);
}

TEST(AnnotationEvent, DraftsOnlyCountAfterSubmit) {
  std::vector<AnnotationEvent> log = {ev(1, "a", "s", Action::Save, "q1", 1)};
  EXPECT_TRUE(final_answers(log).empty());
  log.push_back(ev(2, "a", "s", Action::Save, "q1", 3));
  log.push_back(ev(3, "a", "s", Action::Submit));
  log.push_back(ev(4, "a", "s", Action::Save, "q1", 2));  // after submit, not captured
  auto out = final_answers(log);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].option_label, 3);
  EXPECT_EQ(out[0].submit_event_id, 3u);
}

TEST(AnnotationEvent, RejectedDropsAcceptedWins) {
  std::vector<AnnotationEvent> log = {
      ev(1, "a", "s", Action::Save, "q", 1), ev(2, "a", "s", Action::Submit),
      ev(3, "b", "s", Action::Save, "q", 2), ev(4, "b", "s", Action::Submit),
  };
  EXPECT_EQ(final_answers(log)[0].annotator_id, "b");  // latest unreviewed
  auto accept = ev(5, "i", "s", Action::ReviewAccept);
  accept.target_annotator = "a";
  log.push_back(accept);
  EXPECT_EQ(final_answers(log)[0].annotator_id, "a");
  auto reject = ev(6, "i", "s", Action::ReviewReject);
  reject.target_annotator = "a";
  log.push_back(reject);
  EXPECT_EQ(final_answers(log)[0].annotator_id, "b");
}

TEST(AnnotationEvent, OrderIndependentOfInputOrder) {
  std::vector<AnnotationEvent> log = {ev(3, "a", "s2", Action::Submit), ev(1, "a", "s2", Action::Save, "qb", 1),
                                      ev(2, "a", "s2", Action::Save, "qa", 2), ev(5, "a", "s1", Action::Submit),
                                      ev(4, "a", "s1", Action::Save, "qa", 1)};
  auto out = final_answers(log);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].sample_id, "s1");
  EXPECT_EQ(out[1].question_id, "qa");
  EXPECT_EQ(out[2].question_id, "qb");
}

TEST(AnnotationEvent, ReportExcludesSample) {
  std::vector<AnnotationEvent> log = {ev(1, "a", "s", Action::Save, "q", 1), ev(2, "a", "s", Action::Submit),
                                      ev(3, "b", "s", Action::Report)};
  EXPECT_TRUE(final_answers(log).empty());
}

}  // namespace
}  // namespace t2ieval::annotation
