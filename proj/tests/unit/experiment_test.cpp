#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "teamspace/errors.hpp"
#include "teamspace/intervention.hpp"

namespace teamspace {
namespace {

using testing::at;
using testing::Lab;

ExperimentConfig seeded(std::uint64_t seed) {
  auto c = ExperimentConfig::defaults();
  c.seed = seed;
  return c;
}

// seed 1 gives two control teams, seed 2 two intervention teams.
constexpr std::uint64_t kControl = 1;
constexpr std::uint64_t kIntervention = 2;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const CommandError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no CommandError thrown";
  return ErrorCode::halted;
}

/// Ticks at successive deadlines until the team reaches `phase`.
void run_until(Lab& lab, const TeamId& id, Phase phase) {
  for (int guard = 0; guard < 10 && lab.team(id).phase != phase; ++guard) {
    ASSERT_TRUE(lab.team(id).deadline.has_value());
    lab.ex.tick(*lab.team(id).deadline);
  }
  ASSERT_EQ(lab.team(id).phase, phase);
}

TEST(Lobby, JoinAssignsSequentialIds) {
  Lab lab(seeded(0));
  EXPECT_EQ(lab.ex.join(at(0)), "p0001");
  EXPECT_EQ(lab.ex.join(at(1)), "p0002");
  EXPECT_EQ(lab.log.events().size(), 2u);
}

TEST(Lobby, PseudonymRules) {
  Lab lab(seeded(0));
  auto a = lab.ex.join(at(0));
  auto b = lab.ex.join(at(0));
  EXPECT_THROW(lab.ex.set_pseudonym(a, "   ", at(0)), ValidationError);
  EXPECT_THROW(lab.ex.set_pseudonym(a, std::string(25, 'x'), at(0)), ValidationError);
  EXPECT_THROW(lab.ex.set_pseudonym(a, "tab\there", at(0)), ValidationError);
  EXPECT_THROW(lab.ex.set_pseudonym(a, "System", at(0)), ValidationError);
  lab.ex.set_pseudonym(a, std::string(24, 'x'), at(0));
  lab.ex.set_pseudonym(a, "  Ada ", at(0));
  EXPECT_EQ(*lab.ex.state().participants.at(a).pseudonym, "Ada");
  EXPECT_EQ(code_of([&] { lab.ex.set_pseudonym(b, "ADA", at(0)); }), ErrorCode::duplicate);
  // Multi-byte characters count once each.
  std::string accents;
  for (int i = 0; i < 24; ++i) accents += "\xc3\xa9";
  lab.ex.set_pseudonym(b, accents, at(0));
  EXPECT_THROW(lab.ex.set_pseudonym(b, accents + "\xc3\xa9", at(0)), ValidationError);
}

TEST(Lobby, SurveyRequiresPseudonym) {
  Lab lab(seeded(0));
  auto a = lab.ex.join(at(0));
  EXPECT_EQ(code_of([&] {
              lab.ex.submit_lobby_survey(a, nlohmann::json::object(), {1, 2, 3, 4, 5}, at(0));
            }),
            ErrorCode::precondition);
  lab.ex.set_pseudonym(a, "Ada", at(0));
  EXPECT_THROW(lab.ex.submit_lobby_survey(a, nlohmann::json::object(), {1, 2, 3, 4}, at(0)),
               ValidationError);
  EXPECT_THROW(lab.ex.submit_lobby_survey(a, nlohmann::json::object(), {1, 1, 2, 3, 4}, at(0)),
               ValidationError);
  EXPECT_TRUE(lab.ex.state().lobby.empty());
}

TEST(Lobby, PositionsAreFifo) {
  auto c = seeded(0);
  c.team_size = 20;
  Lab lab(c);
  for (std::size_t i = 1; i <= 12; ++i) {
    std::size_t pos = 0;
    lab.eligible(at(static_cast<double>(i)), &pos);
    EXPECT_EQ(pos, i);
  }
  EXPECT_EQ(lab.ex.state().lobby.size(), 12u);
  EXPECT_EQ(lab.ex.state().lobby.front(), "p0001");
}

TEST(FormTeams, TwelveMakeTwoTeamsInArrivalOrder) {
  Lab lab(seeded(kIntervention));
  auto ids = lab.eligible_many(12, at(0));
  ASSERT_EQ(lab.ex.state().teams.size(), 2u);
  EXPECT_EQ(lab.team("t001").members,
            std::vector<ParticipantId>(ids.begin(), ids.begin() + 6));
  EXPECT_EQ(lab.team("t002").members, std::vector<ParticipantId>(ids.begin() + 6, ids.end()));
  EXPECT_TRUE(lab.ex.state().lobby.empty());
  EXPECT_EQ(lab.team("t001").phase, Phase::discuss);
  EXPECT_EQ(*lab.team("t001").deadline, at(0) + lab.ex.config().discuss);
}

TEST(FormTeams, ElevenLeaveFiveQueued) {
  Lab lab(seeded(0));
  lab.eligible_many(11, at(0));
  EXPECT_EQ(lab.ex.state().teams.size(), 1u);
  EXPECT_EQ(lab.ex.state().lobby.size(), 5u);
}

TEST(FormTeams, NothingWhenEmpty) {
  Lab lab(seeded(0));
  EXPECT_TRUE(lab.ex.form_teams(at(0)).empty());
  EXPECT_TRUE(lab.log.events().empty());
}

TEST(FormTeams, ConditionSequenceIsPinnedBySeed) {
  using enum Condition;
  EXPECT_EQ(condition_sequence(1, 2), (std::vector<Condition>{control, control}));
  EXPECT_EQ(condition_sequence(2, 2), (std::vector<Condition>{intervention, intervention}));
  EXPECT_EQ(condition_sequence(3, 2), (std::vector<Condition>{intervention, control}));
  EXPECT_EQ(condition_sequence(7, 2), (std::vector<Condition>{intervention, intervention}));

  Lab lab(seeded(3));
  lab.eligible_many(12, at(0));
  EXPECT_EQ(lab.team("t001").condition, intervention);
  EXPECT_EQ(lab.team("t002").condition, control);
}

TEST(FormTeams, ConditionCountsLookBinomial) {
  // 200 teams per seed; the bound is about 4.2 standard deviations wide.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto seq = condition_sequence(seed, 200);
    const auto n = std::count(seq.begin(), seq.end(), Condition::intervention);
    EXPECT_GE(n, 70) << "seed " << seed;
    EXPECT_LE(n, 130) << "seed " << seed;
  }
}

TEST(Tick, AdvancesOnlyAtDeadlineAndIsIdempotent) {
  Lab lab(seeded(kIntervention));
  lab.eligible_many(6, at(0));
  const auto deadline = *lab.team("t001").deadline;
  EXPECT_EQ(lab.ex.tick(deadline - Millis(1)), 0u);
  EXPECT_EQ(lab.team("t001").phase, Phase::discuss);
  EXPECT_GT(lab.ex.tick(deadline), 0u);
  EXPECT_EQ(lab.team("t001").phase, Phase::interlude);
  EXPECT_TRUE(lab.team("t001").locked);
  EXPECT_EQ(lab.team("t001").exercise->stage, ExerciseStage::self_report);
  EXPECT_EQ(lab.ex.tick(deadline), 0u);
}

TEST(Tick, ControlInterludeKeepsChatOpenAndAnnouncesPrompt) {
  Lab lab(seeded(kControl));
  lab.eligible_many(6, at(0));
  run_until(lab, "t001", Phase::interlude);
  const auto& t = lab.team("t001");
  EXPECT_FALSE(t.locked);
  EXPECT_FALSE(t.exercise.has_value());
  EXPECT_EQ(*t.deadline, at(540) + lab.ex.config().pause);
  ASSERT_TRUE(t.transcript.back().system);
  EXPECT_EQ(t.transcript.back().body, intervention::kControlPausePrompt);
  run_until(lab, "t001", Phase::decide);
  EXPECT_EQ(lab.count(EventKind::chat_locked), 0u);
}

TEST(Tick, LobbyTimeoutReleasesWaiters) {
  Lab lab(seeded(0));
  auto a = lab.eligible(at(0));
  lab.ex.tick(at(0) + lab.ex.config().lobby_timeout - Millis(1));
  EXPECT_EQ(lab.ex.state().lobby.size(), 1u);
  lab.ex.tick(at(0) + lab.ex.config().lobby_timeout);
  EXPECT_TRUE(lab.ex.state().lobby.empty());
  EXPECT_TRUE(lab.ex.state().participants.at(a).released);
  lab.ex.reconnect(a, at(4000));
  EXPECT_TRUE(lab.ex.state().lobby.empty());
}

TEST(Disconnect, OneDropoutContinuesWithFive) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  lab.ex.disconnect(ids[0], at(10));
  EXPECT_EQ(lab.team("t001").phase, Phase::discuss);
  EXPECT_EQ(lab.team("t001").active.size(), 5u);
  EXPECT_EQ(lab.team("t001").members.size(), 6u);
}

TEST(Disconnect, TwoDropoutsContinueThreeTerminate) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  lab.ex.disconnect(ids[0], at(10));
  lab.ex.disconnect(ids[1], at(11));
  EXPECT_EQ(lab.team("t001").phase, Phase::discuss);
  EXPECT_EQ(lab.team("t001").active.size(), 4u);
  lab.ex.disconnect(ids[2], at(12));
  EXPECT_EQ(lab.team("t001").phase, Phase::terminated);
  EXPECT_EQ(*lab.team("t001").termination_reason, "below_min_team_size");
  EXPECT_FALSE(lab.team("t001").deadline.has_value());
  EXPECT_EQ(lab.count(EventKind::team_terminated), 1u);
  // The remaining members were told.
  EXPECT_TRUE(lab.team("t001").transcript.back().system);
  EXPECT_EQ(code_of([&] { lab.ex.post_message(ids[3], "hello?", at(13)); }),
            ErrorCode::phase_closed);
}

TEST(Disconnect, TerminationLiftsTheLock) {
  Lab lab(seeded(kIntervention));
  auto ids = lab.eligible_many(6, at(0));
  run_until(lab, "t001", Phase::interlude);
  ASSERT_TRUE(lab.team("t001").locked);
  for (int i = 0; i < 3; ++i) lab.ex.disconnect(ids[static_cast<std::size_t>(i)], at(600));
  EXPECT_EQ(lab.team("t001").phase, Phase::terminated);
  EXPECT_FALSE(lab.team("t001").locked);
  EXPECT_EQ(lab.count(EventKind::chat_unlocked), 1u);
  // No interlude for a terminated team.
  EXPECT_EQ(lab.ex.tick(at(10'000)), 0u);
}

TEST(Disconnect, NoEffectAfterCompletion) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  run_until(lab, "t001", Phase::complete);
  const auto before = lab.log.events().size();
  lab.ex.disconnect(ids[0], at(99'999));
  EXPECT_EQ(lab.log.events().size(), before);
}

TEST(Disconnect, UnknownSessionIsNotFound) {
  Lab lab(seeded(0));
  EXPECT_EQ(code_of([&] { lab.ex.disconnect("p9999", at(0)); }), ErrorCode::not_found);
}

TEST(Reconnect, SamePhaseRestoresMembership) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  lab.ex.disconnect(ids[0], at(10));
  lab.ex.reconnect(ids[0], at(20));
  EXPECT_TRUE(lab.team("t001").is_active(ids[0]));
  EXPECT_TRUE(lab.log.events().back().payload["restored"].get<bool>());
}

TEST(Reconnect, LaterPhaseDoesNotRestore) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  lab.ex.disconnect(ids[0], at(10));
  run_until(lab, "t001", Phase::interlude);
  lab.ex.reconnect(ids[0], at(600));
  EXPECT_FALSE(lab.team("t001").is_active(ids[0]));
  EXPECT_FALSE(lab.log.events().back().payload["restored"].get<bool>());
  EXPECT_EQ(code_of([&] { lab.ex.post_message(ids[0], "back", at(601)); }),
            ErrorCode::not_accepting);
}

TEST(Ranking, LastWriterWins) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  lab.ex.submit_team_ranking(ids[0], {1, 2, 3, 4, 5}, false, at(10));
  lab.ex.submit_team_ranking(ids[3], {5, 4, 3, 2, 1}, true, at(20));
  run_until(lab, "t001", Phase::interlude);
  const auto& r = *lab.team("t001").team_ranking;
  EXPECT_EQ(r.ranking, (std::vector<int>{5, 4, 3, 2, 1}));
  EXPECT_TRUE(r.agreed);
  EXPECT_EQ(r.submitter, ids[3]);
}

TEST(Ranking, RejectedOutsideDiscuss) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  run_until(lab, "t001", Phase::decide);
  try {
    lab.ex.submit_team_ranking(ids[0], {1, 2, 3, 4, 5}, true, at(700));
    FAIL();
  } catch (const CommandError& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_accepting);
    EXPECT_STREQ(e.what(), "not accepting rankings");
  }
  EXPECT_FALSE(lab.team("t001").team_ranking.has_value());
}

TEST(Ranking, MalformedPermutationRejected) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  EXPECT_THROW(lab.ex.submit_team_ranking(ids[0], {1, 2, 3, 4, 4}, true, at(1)), ValidationError);
  EXPECT_THROW(lab.ex.submit_team_ranking(ids[0], {1, 2, 3}, true, at(1)), ValidationError);
}

TEST(Allocation, BoundariesAndDeficit) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  EXPECT_EQ(code_of([&] { lab.ex.submit_team_allocation(ids[0], {500000, 0, 0, 0, 0}, at(1)); }),
            ErrorCode::not_accepting);
  run_until(lab, "t001", Phase::decide);
  lab.ex.submit_team_allocation(ids[0], {500000, 0, 0, 0, 0}, at(700));
  lab.ex.submit_team_allocation(ids[1], {100000, 100000, 100000, 100000, 100000}, at(701));
  try {
    lab.ex.submit_team_allocation(ids[2], {100000, 100000, 100000, 100000, 99999}, at(702));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("deficit 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(lab.ex.submit_team_allocation(ids[2], {-1, 1, 0, 0, 500000}, at(703)),
               ValidationError);
  const auto& a = *lab.team("t001").allocation;
  EXPECT_EQ(a.amounts, (std::vector<std::int64_t>(5, 100000)));
  EXPECT_EQ(a.submitter, ids[1]);
}

TEST(EarlyFinish, AllActiveDoneEndsDecide) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  run_until(lab, "t001", Phase::decide);
  lab.ex.disconnect(ids[5], at(700));
  for (std::size_t i = 0; i < 4; ++i) lab.ex.signal_done(ids[i], at(701));
  EXPECT_EQ(lab.team("t001").phase, Phase::decide);
  lab.ex.signal_done(ids[4], at(702));
  EXPECT_EQ(lab.team("t001").phase, Phase::exit_survey);
  EXPECT_EQ(code_of([&] { lab.ex.signal_done(ids[0], at(703)); }), ErrorCode::phase_closed);
}

TEST(EarlyFinish, DoneSignalsDoNotCarryOverPhases) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  for (std::size_t i = 0; i < 5; ++i) lab.ex.signal_done(ids[i], at(1));
  run_until(lab, "t001", Phase::decide);
  lab.ex.signal_done(ids[5], at(700));
  EXPECT_EQ(lab.team("t001").phase, Phase::decide);
}

TEST(ExitSurvey, LikertRangeDuplicatesAndCompletion) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  const auto& config = lab.ex.config();
  EXPECT_EQ(code_of([&] { lab.ex.submit_exit_survey(ids[0], testing::full_survey(config), at(1)); }),
            ErrorCode::not_accepting);
  run_until(lab, "t001", Phase::exit_survey);
  const auto now = *lab.team("t001").deadline - Millis(1000);
  EXPECT_THROW(lab.ex.submit_exit_survey(ids[0], testing::full_survey(config, 6), now),
               ValidationError);
  EXPECT_THROW(lab.ex.submit_exit_survey(ids[0], testing::full_survey(config, 0), now),
               ValidationError);
  auto missing = testing::full_survey(config);
  missing.likert.erase("viability_2");
  EXPECT_THROW(lab.ex.submit_exit_survey(ids[0], missing, now), ValidationError);
  auto extra = testing::full_survey(config);
  extra.likert["made_up"] = 3;
  EXPECT_THROW(lab.ex.submit_exit_survey(ids[0], extra, now), ValidationError);
  auto short_alloc = testing::full_survey(config);
  short_alloc.allocation[0] -= 1;
  EXPECT_THROW(lab.ex.submit_exit_survey(ids[0], short_alloc, now), ValidationError);

  lab.ex.submit_exit_survey(ids[0], testing::full_survey(config), now);
  EXPECT_EQ(code_of([&] { lab.ex.submit_exit_survey(ids[0], testing::full_survey(config), now); }),
            ErrorCode::duplicate);
  lab.ex.disconnect(ids[5], now);
  for (std::size_t i = 1; i < 5; ++i) {
    lab.ex.submit_exit_survey(ids[i], testing::full_survey(config), now);
  }
  EXPECT_EQ(lab.team("t001").phase, Phase::complete);
  EXPECT_EQ(lab.team("t001").exit_surveys.size(), 5u);
}

TEST(ExitSurvey, TimeoutCompletesWithoutStragglers) {
  Lab lab(seeded(kControl));
  auto ids = lab.eligible_many(6, at(0));
  run_until(lab, "t001", Phase::exit_survey);
  const auto opened = lab.log.events().back().wall_time;
  lab.ex.submit_exit_survey(ids[0], testing::full_survey(lab.ex.config()), opened);
  lab.ex.tick(opened + Millis(599'999));
  EXPECT_EQ(lab.team("t001").phase, Phase::exit_survey);
  lab.ex.tick(opened + Millis(600'000));
  EXPECT_EQ(lab.team("t001").phase, Phase::complete);
}

TEST(Lifecycle, PhaseHistoryFollowsTheProtocol) {
  for (auto seed : {kControl, kIntervention}) {
    Lab lab(seeded(seed));
    lab.eligible_many(6, at(0));
    run_until(lab, "t001", Phase::complete);
    EXPECT_EQ(lab.team("t001").history,
              (std::vector<Phase>{Phase::discuss, Phase::interlude, Phase::decide,
                                  Phase::exit_survey, Phase::complete}));
    EXPECT_EQ(to_json(replay(lab.log.events())), to_json(lab.ex.state()));
  }
}

class Exercise : public ::testing::Test {
 protected:
  Exercise() : lab(small_team()) { ids = lab.eligible_many(4, at(0)); }

  static ExperimentConfig small_team() {
    auto c = seeded(kIntervention);
    c.team_size = 4;
    c.min_team_size = 2;
    return c;
  }

  void enter() { run_until(lab, "t001", Phase::interlude); }
  const ExerciseState& ex() const { return *lab.team("t001").exercise; }

  Lab lab;
  std::vector<ParticipantId> ids;
};

TEST_F(Exercise, AllReportsAdvanceToGuessingImmediately) {
  enter();
  const auto now = at(541);
  const int scores[] = {3, -1, 2, 4};
  for (std::size_t i = 0; i < 4; ++i) lab.ex.submit_self_report(ids[i], scores[i], now);
  EXPECT_EQ(ex().stage, ExerciseStage::guessing);
  EXPECT_EQ(*lab.team("t001").deadline, now + lab.ex.config().exercise_stage);
  EXPECT_EQ(ex().rosters.at(ids[0]), (std::vector<ParticipantId>{ids[1], ids[2], ids[3]}));
}

TEST_F(Exercise, ReportRulesAndTimeout) {
  enter();
  EXPECT_THROW(lab.ex.submit_self_report(ids[0], 7, at(541)), ValidationError);
  lab.ex.submit_self_report(ids[0], 1, at(541));
  EXPECT_EQ(code_of([&] { lab.ex.submit_self_report(ids[0], 2, at(541)); }),
            ErrorCode::duplicate);
  lab.ex.submit_self_report(ids[1], 1, at(541));
  lab.ex.submit_self_report(ids[2], 1, at(541));
  EXPECT_EQ(ex().stage, ExerciseStage::self_report);
  lab.ex.tick(*lab.team("t001").deadline);
  EXPECT_EQ(ex().stage, ExerciseStage::guessing);
  EXPECT_EQ(ex().self_reports.size(), 3u);
  EXPECT_EQ(code_of([&] { lab.ex.submit_self_report(ids[3], 1, at(700)); }),
            ErrorCode::phase_closed);
}

TEST_F(Exercise, ChatIsLockedThroughoutAndReopensInDecide) {
  enter();
  EXPECT_EQ(code_of([&] { lab.ex.post_message(ids[0], "hi", at(541)); }), ErrorCode::chat_locked);
  run_until(lab, "t001", Phase::decide);
  EXPECT_FALSE(lab.team("t001").locked);
  EXPECT_EQ(lab.ex.post_message(ids[0], "hi", at(900)).phase, "decide");
  EXPECT_EQ(lab.count(EventKind::chat_locked), 1u);
  EXPECT_EQ(lab.count(EventKind::chat_unlocked), 1u);
}

TEST_F(Exercise, GuessRules) {
  enter();
  // ids[0] skips the self-report and may still guess.
  for (std::size_t i = 1; i < 4; ++i) lab.ex.submit_self_report(ids[i], 0, at(541));
  lab.ex.tick(*lab.team("t001").deadline);
  ASSERT_EQ(ex().stage, ExerciseStage::guessing);
  const auto now = at(700);
  EXPECT_THROW(lab.ex.submit_guesses(ids[0], {{ids[0], 1}, {ids[1], 1}, {ids[2], 1}, {ids[3], 1}},
                                     now),
               ValidationError);
  try {
    lab.ex.submit_guesses(ids[0], {{ids[1], 1}, {ids[2], 1}}, now);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("missing: " + ids[3]), std::string::npos);
  }
  EXPECT_THROW(lab.ex.submit_guesses(ids[0], {{ids[1], 1}, {ids[2], 1}, {ids[3], 1}, {"p0099", 1}},
                                     now),
               ValidationError);
  EXPECT_THROW(lab.ex.submit_guesses(ids[0], {{ids[1], 1}, {ids[2], 9}, {ids[3], 1}}, now),
               ValidationError);
  lab.ex.submit_guesses(ids[0], {{ids[1], 1}, {ids[2], 1}, {ids[3], 1}}, now);
  EXPECT_EQ(code_of([&] { lab.ex.submit_guesses(ids[0], {{ids[1], 1}, {ids[2], 1}, {ids[3], 1}},
                                                now); }),
            ErrorCode::duplicate);
}

TEST_F(Exercise, DropoutAfterRosterMayBeIncludedOrOmitted) {
  enter();
  for (std::size_t i = 0; i < 4; ++i) lab.ex.submit_self_report(ids[i], 0, at(541));
  lab.ex.disconnect(ids[3], at(542));
  lab.ex.submit_guesses(ids[0], {{ids[1], 1}, {ids[2], 1}}, at(543));
  lab.ex.submit_guesses(ids[1], {{ids[0], 1}, {ids[2], 1}, {ids[3], 1}}, at(543));
  EXPECT_EQ(ex().stage, ExerciseStage::guessing);
  lab.ex.submit_guesses(ids[2], {{ids[0], 1}, {ids[1], 1}}, at(543));
  EXPECT_EQ(ex().stage, ExerciseStage::feedback);
}

TEST_F(Exercise, FeedbackHandExample) {
  enter();
  const int scores[] = {3, -1, 2, 4};
  for (std::size_t i = 0; i < 4; ++i) lab.ex.submit_self_report(ids[i], scores[i], at(541));
  lab.ex.submit_guesses(ids[3], {{ids[0], 3}, {ids[1], -1}, {ids[2], 2}}, at(542));
  lab.ex.tick(*lab.team("t001").deadline);
  ASSERT_EQ(ex().stage, ExerciseStage::feedback);
  const auto& f = *ex().feedback;
  EXPECT_DOUBLE_EQ(*f.climate, 2.0);
  ASSERT_EQ(f.accuracies.size(), 1u);
  EXPECT_EQ(f.accuracies.at(ids[3])->percent(), 100);

  const auto view = intervention::feedback_view(f, ids[3]);
  EXPECT_EQ(view["climate_display"], "2.0");
  EXPECT_EQ(view["own_accuracy_percent"], 100);
  EXPECT_TRUE(intervention::feedback_view(f, ids[0])["own_accuracy_percent"].is_null());
  EXPECT_EQ(lab.count(EventKind::feedback_computed), 1u);

  for (std::size_t i = 0; i < 3; ++i) lab.ex.acknowledge_feedback(ids[i], at(700));
  EXPECT_EQ(ex().stage, ExerciseStage::feedback);
  lab.ex.acknowledge_feedback(ids[3], at(700));
  EXPECT_EQ(lab.team("t001").phase, Phase::decide);
  EXPECT_EQ(lab.team("t001").exercise->stage, ExerciseStage::done);
}

TEST_F(Exercise, NoReportsMeansClimateUnavailable) {
  enter();
  lab.ex.tick(*lab.team("t001").deadline);
  lab.ex.tick(*lab.team("t001").deadline);
  ASSERT_EQ(ex().stage, ExerciseStage::feedback);
  EXPECT_FALSE(ex().feedback->climate.has_value());
  EXPECT_TRUE(ex().feedback->accuracies.empty());
  EXPECT_EQ(intervention::feedback_view(*ex().feedback, ids[0])["climate_display"],
            "unavailable");
}

TEST(Resume, ContinuesTheSequenceAndConditionStream) {
  Lab first(seeded(3));
  first.eligible_many(7, at(0));
  MemoryEventLog tail;
  for (const auto& e : first.log.events()) tail.append(e);
  const auto prefix = tail.events().size();
  auto resumed = Experiment::resume(seeded(3), tail, first.log.events());
  EXPECT_EQ(to_json(resumed.state()), to_json(first.ex.state()));
  for (int i = 0; i < 5; ++i) {
    auto id = resumed.join(at(1));
    resumed.set_pseudonym(id, "late-" + id, at(1));
    resumed.submit_lobby_survey(id, nlohmann::json::object(), {1, 2, 3, 4, 5}, at(1));
  }
  ASSERT_GT(tail.events().size(), prefix);
  EXPECT_EQ(tail.events()[prefix].seq, prefix + 1);
  EXPECT_EQ(resumed.state().teams.at("t002").condition, Condition::control);
}

}  // namespace
}  // namespace teamspace
