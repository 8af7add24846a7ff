#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "teamspace/analysis.hpp"
#include "teamspace/errors.hpp"
#include "teamspace/event_log.hpp"

namespace teamspace {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> outputs(const std::filesystem::path& dir) {
  std::map<std::string, std::string> m;
  for (const auto& f : std::filesystem::directory_iterator(dir)) {
    m[f.path().filename().string()] = slurp(f.path());
  }
  return m;
}

/// Loopback run written to `dir/events.jsonl` with its config beside it.
void record(const testing::TempDir& dir, const std::string& cohort) {
  JsonlEventLog log(dir / "events.jsonl");
  const auto spec = bots::cohort_from_json(testing::read_json(testing::data_path("cohorts/" + cohort)));
  auto config = bots::apply_overrides(ExperimentConfig::defaults(), spec.config);
  if (!spec.config.contains("seed")) config.seed = spec.seed;
  nlohmann::json j;
  to_json(j, config);
  std::ofstream(dir / "config.json") << j.dump(2);
  testing::run_cohort_file(cohort, {}, &log);
}

analysis::Options all_of(const testing::TempDir& dir, const std::string& out) {
  analysis::Options o;
  o.subcommand = "all";
  o.log = dir / "events.jsonl";
  o.dict = testing::data_path("demo_dictionary.json");
  o.out = dir / out;
  return o;
}

TEST(Pipeline, AnalyzeIsAFunctionOfTheLog) {
  testing::TempDir dir;
  record(dir, "standard.json");
  std::ostringstream err;
  ASSERT_EQ(analysis::run(all_of(dir, "a"), err), analysis::kExitOk) << err.str();
  ASSERT_EQ(analysis::run(all_of(dir, "b"), err), analysis::kExitOk) << err.str();
  const auto a = outputs(dir / "a");
  EXPECT_GE(a.size(), 10u);
  EXPECT_EQ(a, outputs(dir / "b"));

  // The in-memory path over the replayed state writes the same bytes.
  const auto events = read_event_log(dir / "events.jsonl");
  const auto config = analysis::discover_config(dir / "events.jsonl", std::nullopt);
  auto o = all_of(dir, "c");
  ASSERT_EQ(analysis::run_on_state(o, replay(events), config, err), analysis::kExitOk);
  EXPECT_EQ(a, outputs(dir / "c"));
}

TEST(Pipeline, TerminatedTeamsAreListedNotAnalyzed) {
  testing::TempDir dir;
  record(dir, "coverage.json");
  std::ostringstream err;
  ASSERT_EQ(analysis::run(all_of(dir, "out"), err), analysis::kExitOk) << err.str();
  const auto excluded = slurp(dir / "out/excluded_teams.csv");
  EXPECT_NE(excluded.find("terminated"), std::string::npos) << excluded;

  const auto state = replay(read_event_log(dir / "events.jsonl"));
  const auto report = analysis::analyze(state, analysis::discover_config(dir / "events.jsonl", {}));
  for (const auto& t : report.teams) EXPECT_EQ(state.teams.at(t.team_id).phase, Phase::complete);
  ASSERT_FALSE(report.excluded.empty());
  for (const auto& e : report.excluded) {
    EXPECT_NE(state.teams.at(e.team_id).phase, Phase::complete);
    for (const auto& p : report.participants) EXPECT_NE(p.team_id, e.team_id);
  }
}

TEST(Pipeline, TamperedFeedbackExitsWithConsistency) {
  testing::TempDir dir;
  record(dir, "standard.json");
  auto events = read_event_log(dir / "events.jsonl");
  bool touched = false;
  for (auto& e : events) {
    if (e.kind == EventKind::feedback_computed && !touched) {
      e.payload["climate"] = e.payload["climate"].is_null() ? 4.0 : e.payload["climate"].get<double>() + 1;
      touched = true;
    }
  }
  ASSERT_TRUE(touched);
  std::filesystem::remove(dir / "events.jsonl");
  write_event_log(dir / "events.jsonl", events);
  std::ostringstream err;
  EXPECT_EQ(analysis::run(all_of(dir, "out"), err), analysis::kExitConsistency);
  EXPECT_NE(err.str().find("t00"), std::string::npos) << err.str();
}

TEST(Pipeline, NothingCompletedExitsWithValidation) {
  testing::TempDir dir;
  {
    JsonlEventLog log(dir / "events.jsonl");
    Experiment ex(ExperimentConfig::defaults(), log);
    ex.join(testing::at(0));
  }
  std::ostringstream err;
  auto o = all_of(dir, "out");
  EXPECT_EQ(analysis::run(o, err), analysis::kExitValidation);
  EXPECT_NE(err.str().find("no analyzable teams"), std::string::npos) << err.str();
}

TEST(Pipeline, CorruptLogExitsWithValidation) {
  testing::TempDir dir;
  std::ofstream(dir / "events.jsonl") << "{\"event_seq\": 1}\n";
  std::ostringstream err;
  EXPECT_EQ(analysis::run(all_of(dir, "out"), err), analysis::kExitValidation);
  EXPECT_FALSE(err.str().empty());
}

}  // namespace
}  // namespace teamspace
