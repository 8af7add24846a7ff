#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "teamspace/errors.hpp"

namespace teamspace {
namespace {

using testing::at;

std::vector<Event> session(std::uint64_t seed) {
  auto c = ExperimentConfig::defaults();
  c.seed = seed;
  testing::Lab lab(c);
  auto ids = lab.eligible_many(6, at(0));
  lab.ex.post_message(ids[0], "hello", at(1));
  lab.ex.disconnect(ids[1], at(2));
  for (int i = 0; i < 8 && !lab.team("t001").finished(); ++i) {
    lab.ex.tick(*lab.team("t001").deadline);
  }
  return lab.log.events();
}

TEST(Replay, EmptyLogIsEmptyState) {
  const auto s = replay(std::vector<Event>{});
  EXPECT_EQ(s.last_seq, 0u);
  EXPECT_TRUE(s.participants.empty());
  EXPECT_TRUE(s.teams.empty());
  EXPECT_EQ(to_json(s), to_json(SystemState{}));
}

TEST(Replay, EveryPrefixReplays) {
  for (auto seed : {1u, 2u}) {
    const auto events = session(seed);
    SystemState incremental;
    for (std::size_t n = 0; n <= events.size(); ++n) {
      const std::span<const Event> prefix(events.data(), n);
      EXPECT_EQ(to_json(replay(prefix)), to_json(incremental)) << "prefix " << n;
      if (n < events.size()) apply(incremental, events[n]);
    }
  }
}

TEST(Replay, GapIsReplayError) {
  auto events = session(1);
  events.erase(events.begin() + 3);
  EXPECT_THROW(replay(events), ReplayError);
}

TEST(Replay, EventThatDoesNotFitIsReplayError) {
  auto events = session(1);
  Event stray;
  stray.seq = events.size() + 1;
  stray.wall_time = at(99'999);
  stray.session_id = "p0042";
  stray.kind = EventKind::pseudonym_set;
  stray.payload = {{"pseudonym", "ghost"}};
  events.push_back(stray);
  try {
    replay(events);
    FAIL();
  } catch (const ReplayError& e) {
    EXPECT_EQ(e.offset(), stray.seq);
  }
}

TEST(Replay, PhaseHistoryAndTranscript) {
  const auto s = replay(session(2));
  const auto& t = s.teams.at("t001");
  EXPECT_EQ(t.history.front(), Phase::discuss);
  EXPECT_EQ(t.phase, Phase::complete);
  EXPECT_EQ(t.condition, Condition::intervention);
  EXPECT_FALSE(t.is_active("p0002"));
  EXPECT_EQ(t.disconnected_in.at("p0002"), Phase::discuss);
  for (std::size_t i = 0; i < t.transcript.size(); ++i) EXPECT_EQ(t.transcript[i].message_id, i + 1);
  const auto member = std::count_if(t.transcript.begin(), t.transcript.end(),
                                    [](const ChatEntry& m) { return !m.system; });
  EXPECT_EQ(member, 1);
  EXPECT_EQ(s.team_of("p0001"), &t);
  EXPECT_EQ(s.team_of("p9999"), nullptr);
}

TEST(Names, RoundTrip) {
  for (auto c : {Condition::control, Condition::intervention}) {
    EXPECT_EQ(condition_from_string(to_string(c)), c);
  }
  for (auto p : {Phase::discuss, Phase::interlude, Phase::decide, Phase::exit_survey,
                 Phase::terminated, Phase::complete}) {
    EXPECT_EQ(phase_from_string(to_string(p)), p);
  }
  for (auto s : {ExerciseStage::self_report, ExerciseStage::guessing, ExerciseStage::feedback,
                 ExerciseStage::done}) {
    EXPECT_EQ(stage_from_string(to_string(s)), s);
  }
  EXPECT_THROW(phase_from_string("lunch"), std::invalid_argument);
}

TEST(ExitSurveyJson, RoundTrip) {
  auto r = testing::full_survey(ExperimentConfig::defaults(), 4);
  r.open["openness"] = "fairly open, \"mostly\"";
  const auto back = exit_survey_from_json(to_json(r));
  EXPECT_EQ(back.likert, r.likert);
  EXPECT_EQ(back.binary, r.binary);
  EXPECT_EQ(back.open, r.open);
  EXPECT_EQ(back.allocation, r.allocation);
}

TEST(Clock, Iso8601) {
  const auto t = parse_iso8601("2026-10-16T09:30:00.250Z");
  EXPECT_EQ(to_iso8601(t), "2026-10-16T09:30:00.250Z");
  EXPECT_EQ(to_iso8601(t + Millis(750)), "2026-10-16T09:30:01.000Z");
  EXPECT_THROW(parse_iso8601("2026-10-16 09:30"), std::invalid_argument);
  EXPECT_THROW(parse_iso8601("2026-13-16T09:30:00.000Z"), std::invalid_argument);
}

}  // namespace
}  // namespace teamspace
