#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "teamspace/analysis.hpp"
#include "teamspace/errors.hpp"

namespace teamspace {
namespace {

using testing::at;
using Categories = std::map<std::string, std::vector<std::string>>;

/// A finished control team whose members ranked the proposals as given.
struct Finished {
  explicit Finished(std::vector<std::vector<int>> rankings, std::uint64_t seed = 1)
      : lab(config(rankings.size(), seed)) {
    for (std::size_t i = 0; i < rankings.size(); ++i) {
      auto id = lab.ex.join(at(0));
      lab.ex.set_pseudonym(id, "m" + std::to_string(i), at(0));
      lab.ex.submit_lobby_survey(id, nlohmann::json::object(), rankings[i], at(0));
      ids.push_back(id);
    }
  }

  static ExperimentConfig config(std::size_t n, std::uint64_t seed) {
    auto c = ExperimentConfig::defaults();
    c.team_size = static_cast<int>(n);
    c.min_team_size = 2;
    c.seed = seed;
    return c;
  }

  void to_survey() {
    for (int i = 0; i < 8 && lab.team("t001").phase != Phase::exit_survey; ++i) {
      lab.ex.tick(*lab.team("t001").deadline);
    }
  }

  void finish() {
    to_survey();
    lab.ex.tick(*lab.team("t001").deadline);
  }

  testing::Lab lab;
  std::vector<ParticipantId> ids;
};

TEST(Describe, SampleStandardDeviation) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const auto d = analysis::describe(v);
  EXPECT_EQ(d.n, 8u);
  EXPECT_DOUBLE_EQ(*d.mean, 5.0);
  EXPECT_DOUBLE_EQ(*d.sd, std::sqrt(32.0 / 7.0));
  const std::vector<double> one{3};
  EXPECT_FALSE(analysis::describe(one).sd.has_value());
  EXPECT_FALSE(analysis::describe(std::vector<double>{}).mean.has_value());
}

TEST(Analyze, NoCompletedTeamIsValidationError) {
  Finished f({{1, 2, 3, 4, 5}, {5, 4, 3, 2, 1}});
  try {
    analysis::analyze(f.lab.ex.state(), f.lab.ex.config());
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "no analyzable teams");
  }
}

TEST(Analyze, DisagreementMatchesPairwiseFootrule) {
  const std::vector<std::vector<int>> r{{1, 2, 3, 4, 5}, {5, 4, 3, 2, 1}, {2, 1, 3, 4, 5}};
  Finished f(r);
  f.finish();
  const auto report = analysis::analyze(f.lab.ex.state(), f.lab.ex.config());
  ASSERT_EQ(report.teams.size(), 1u);
  // |a-b| sums: (a,b)=12, (a,c)=2, (b,c)=12
  EXPECT_DOUBLE_EQ(*report.teams[0].baseline_disagreement, 26.0 / 3.0);
  EXPECT_FALSE(report.teams[0].climate.has_value());
  EXPECT_FALSE(report.teams[0].compromise.has_value());
}

TEST(Analyze, ViabilityWithReverseItem) {
  Finished f({{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}});
  f.to_survey();
  const auto& config = f.lab.ex.config();
  auto all_fives = testing::full_survey(config, 5);
  all_fives.likert["viability_2"] = 1;
  f.lab.ex.submit_exit_survey(f.ids[0], all_fives, at(5000));
  f.lab.ex.submit_exit_survey(f.ids[1], testing::full_survey(config, 3), at(5000));
  ASSERT_EQ(f.lab.team("t001").phase, Phase::complete);
  const auto report = analysis::analyze(f.lab.ex.state(), config);
  EXPECT_DOUBLE_EQ(*report.participants[0].scales.at("viability"), 5.0);
  EXPECT_DOUBLE_EQ(*report.participants[1].scales.at("viability"), 3.0);
  EXPECT_DOUBLE_EQ(*report.participants[0].scales.at("satisfaction"), 5.0);
  const auto& d = report.descriptives.at("viability").at("control");
  EXPECT_EQ(d.n, 2u);
  EXPECT_DOUBLE_EQ(*d.mean, 4.0);
  EXPECT_DOUBLE_EQ(*d.sd, std::sqrt(2.0));
}

TEST(Analyze, CompromiseFromSurveyAllocations) {
  Finished f({{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}});
  for (int i = 0; i < 8 && f.lab.team("t001").phase != Phase::decide; ++i) {
    f.lab.ex.tick(*f.lab.team("t001").deadline);
  }
  f.lab.ex.submit_team_allocation(f.ids[0], {100000, 100000, 100000, 100000, 100000}, at(2000));
  f.to_survey();
  auto a = testing::full_survey(f.lab.ex.config());
  a.allocation = {100000, 100000, 100000, 100000, 100000};
  auto b = a;
  b.allocation = {200000, 0, 100000, 100000, 100000};
  f.lab.ex.submit_exit_survey(f.ids[0], a, at(5000));
  f.lab.ex.submit_exit_survey(f.ids[1], b, at(5000));
  const auto report = analysis::analyze(f.lab.ex.state(), f.lab.ex.config());
  // Member b differs by +0.2 and -0.2 in two of five proportions.
  const double rms_b = std::sqrt((0.04 + 0.04) / 5.0);
  EXPECT_DOUBLE_EQ(*report.teams[0].compromise, rms_b / 2.0);
  EXPECT_EQ(*report.participants[0].allocation_divergence, 0.0);
  EXPECT_DOUBLE_EQ(*report.participants[1].allocation_divergence, rms_b);
}

TEST(Analyze, TerminatedTeamsAreListedNotMeasured) {
  auto c = ExperimentConfig::defaults();
  c.seed = 1;
  testing::Lab lab(c);
  auto ids = lab.eligible_many(12, at(0));
  for (std::size_t i = 6; i < 9; ++i) lab.ex.disconnect(ids[i], at(1));
  for (int i = 0; i < 8 && !lab.team("t001").finished(); ++i) lab.ex.tick(*lab.team("t001").deadline);
  const auto report = analysis::analyze(lab.ex.state(), lab.ex.config());
  ASSERT_EQ(report.teams.size(), 1u);
  EXPECT_EQ(report.teams[0].team_id, "t001");
  ASSERT_EQ(report.excluded.size(), 1u);
  EXPECT_EQ(report.excluded[0].team_id, "t002");
  EXPECT_EQ(report.excluded[0].final_phase, "terminated");
  EXPECT_EQ(report.excluded[0].reason, "below_min_team_size");
  for (const auto& p : report.participants) EXPECT_EQ(p.team_id, "t001");
}

TEST(Analyze, DropoutsLeaveTheMeasuredRoster) {
  Finished f({{1, 2, 3, 4, 5}, {5, 4, 3, 2, 1}, {1, 2, 3, 4, 5}});
  f.lab.ex.disconnect(f.ids[1], at(1));
  f.finish();
  const auto report = analysis::analyze(f.lab.ex.state(), f.lab.ex.config());
  EXPECT_EQ(report.teams[0].members, 3u);
  EXPECT_EQ(report.teams[0].analyzed_members, 2u);
  EXPECT_EQ(*report.teams[0].baseline_disagreement, 0.0);
}

TEST(Consistency, TamperedFeedbackIsDetected) {
  auto c = ExperimentConfig::defaults();
  c.seed = 2;
  testing::Lab lab(c);
  auto ids = lab.eligible_many(6, at(0));
  lab.ex.tick(at(540));
  for (std::size_t i = 0; i < 6; ++i) lab.ex.submit_self_report(ids[i], 1, at(541));
  for (std::size_t i = 0; i < 6; ++i) {
    std::map<ParticipantId, int> g;
    for (const auto& o : ids) {
      if (o != ids[i]) g[o] = 0;
    }
    lab.ex.submit_guesses(ids[i], g, at(542));
  }
  EXPECT_NO_THROW(analysis::check_feedback_consistency(lab.ex.state()));

  auto events = lab.log.events();
  for (auto& e : events) {
    if (e.kind == EventKind::feedback_computed) e.payload["climate"] = 1.5;
  }
  EXPECT_THROW(analysis::check_feedback_consistency(replay(events)), ConsistencyError);

  events = lab.log.events();
  for (auto& e : events) {
    if (e.kind == EventKind::feedback_computed) e.payload["accuracies"].erase(ids[0]);
  }
  EXPECT_THROW(analysis::check_feedback_consistency(replay(events)), ConsistencyError);
}

TEST(Liwc, RowsExcludeSystemAndControlInterludeMessages) {
  Finished f({{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}});
  f.lab.ex.post_message(f.ids[0], "you and you", at(1));
  f.lab.ex.tick(*f.lab.team("t001").deadline);
  ASSERT_EQ(f.lab.team("t001").phase, Phase::interlude);
  f.lab.ex.post_message(f.ids[1], "you you you you", at(600));
  f.finish();
  const LiwcDictionary dict(Categories{{"you", {"you"}}});
  const auto rows = analysis::liwc_rows(f.lab.ex.state(), dict, true);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].phase, "discuss");
  EXPECT_EQ(rows[0].profile.message_count, 1u);
  EXPECT_DOUBLE_EQ(rows[0].profile.values.at("you"), 2.0 / 3.0);

  const auto shifts = analysis::liwc_shifts(rows, dict);
  ASSERT_EQ(shifts.size(), 1u);
  EXPECT_EQ(shifts[0].status, "n/a");
  EXPECT_FALSE(shifts[0].decide.has_value());
}

TEST(Liwc, ShiftStatusesAndConditionPooling) {
  const LiwcDictionary dict(Categories{{"you", {"you"}}});
  auto row = [](std::string team, Condition c, std::string phase, double v) {
    analysis::LiwcRow r{std::move(team), c, std::move(phase), {}};
    r.profile.message_count = 1;
    r.profile.values["you"] = v;
    return r;
  };
  const std::vector<analysis::LiwcRow> rows{
      row("t001", Condition::intervention, "discuss", 0.1),
      row("t001", Condition::intervention, "decide", 0.189),
      row("t002", Condition::intervention, "discuss", 0.3),
      row("t002", Condition::intervention, "decide", 0.3),
      row("t003", Condition::control, "discuss", 0.0),
      row("t003", Condition::control, "decide", 0.2)};
  const auto shifts = analysis::liwc_shifts(rows, dict);
  ASSERT_EQ(shifts.size(), 3u);
  EXPECT_NEAR(*shifts[0].shift_percent, 89.0, 1e-9);
  EXPECT_EQ(shifts[0].status, "ok");
  EXPECT_EQ(*shifts[1].shift_percent, 0.0);
  EXPECT_EQ(shifts[2].status, "new");

  const auto pooled = analysis::liwc_condition_shifts(shifts);
  ASSERT_EQ(pooled.size(), 2u);
  const auto& iv = pooled[1];
  EXPECT_EQ(iv.condition, "intervention");
  EXPECT_EQ(iv.team_shifts.n, 2u);
  EXPECT_NEAR(*iv.team_shifts.mean, 44.5, 1e-9);
  EXPECT_NEAR(*iv.pooled_shift_percent, (0.2445 / 0.2 - 1.0) * 100.0, 1e-9);
  EXPECT_EQ(pooled[0].team_shifts.n, 0u);
  EXPECT_FALSE(pooled[0].pooled_shift_percent.has_value());
}

TEST(Run, ExitCodes) {
  testing::TempDir dir;
  std::ostringstream err;
  analysis::Options o;
  o.subcommand = "disagreement";
  o.log = dir / "missing.jsonl";
  o.out = dir / "out";
  EXPECT_EQ(analysis::run(o, err), analysis::kExitValidation);

  Finished f({{1, 2, 3, 4, 5}, {5, 4, 3, 2, 1}});
  EXPECT_EQ(analysis::run_on_state(o, f.lab.ex.state(), f.lab.ex.config(), err),
            analysis::kExitValidation);
  EXPECT_NE(err.str().find("no analyzable teams"), std::string::npos);

  f.finish();
  EXPECT_EQ(analysis::run_on_state(o, f.lab.ex.state(), f.lab.ex.config(), err), analysis::kExitOk);
  EXPECT_TRUE(std::filesystem::exists(o.out / "disagreement.csv"));
  EXPECT_TRUE(std::filesystem::exists(o.out / "excluded_teams.csv"));

  o.subcommand = "sentiment";
  EXPECT_EQ(analysis::run_on_state(o, f.lab.ex.state(), f.lab.ex.config(), err),
            analysis::kExitValidation);
  o.subcommand = "liwc";
  EXPECT_EQ(analysis::run_on_state(o, f.lab.ex.state(), f.lab.ex.config(), err),
            analysis::kExitValidation);
  {
    std::ofstream(dir / "bad.json") << "{\n  \"x\": [\"Y\"]\n}";
  }
  o.dict = dir / "bad.json";
  err.str("");
  EXPECT_EQ(analysis::run_on_state(o, f.lab.ex.state(), f.lab.ex.config(), err),
            analysis::kExitValidation);
  EXPECT_NE(err.str().find("line 2"), std::string::npos) << err.str();
}

TEST(Run, DiscoverConfigPrefersExplicitThenSibling) {
  testing::TempDir dir;
  EXPECT_EQ(analysis::discover_config(dir / "events.jsonl", std::nullopt).team_size, 6);
  {
    std::ofstream(dir / "config.json") << R"({"team_size": 4})";
    std::ofstream(dir / "other.json") << R"({"team_size": 5})";
  }
  EXPECT_EQ(analysis::discover_config(dir / "events.jsonl", std::nullopt).team_size, 4);
  EXPECT_EQ(analysis::discover_config(dir / "events.jsonl", dir / "other.json").team_size, 5);
}

}  // namespace
}  // namespace teamspace
