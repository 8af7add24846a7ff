#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "teamspace/bot_hub.hpp"
#include "teamspace/config.hpp"
#include "teamspace/experiment.hpp"

namespace teamspace::testing {

inline std::filesystem::path data_path(const std::string& rel) {
  return std::filesystem::path(TEAMSPACE_DATA_DIR) / rel;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

inline Timestamp t0() { return parse_iso8601("2026-01-05T09:00:00.000Z"); }

inline Timestamp at(double seconds) {
  return t0() + Millis(static_cast<long long>(seconds * 1000.0));
}

/// Twenty-second chat phases and short interlude stages.
inline ExperimentConfig compressed_config(std::uint64_t seed = 0) {
  auto c = bots::apply_overrides(ExperimentConfig::defaults(),
                                 read_json(data_path("config/compressed.json")));
  c.seed = seed;
  return c;
}

/// Smallest seed >= `from` whose first teams get exactly `wanted`.
inline std::uint64_t seed_for(const std::vector<Condition>& wanted, std::uint64_t from = 0) {
  for (std::uint64_t s = from;; ++s) {
    if (condition_sequence(s, wanted.size()) == wanted) return s;
  }
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("teamspace-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// A complete exit survey answering every Likert item with `likert`.
inline ExitSurveyResponse full_survey(const ExperimentConfig& config, int likert = 3) {
  ExitSurveyResponse r;
  for (const auto& scale : config.survey.scales) {
    for (const auto& item : scale.items) r.likert[item.id] = likert;
  }
  for (const auto& item : config.survey.binary_items) r.binary[item.id] = true;
  r.allocation.assign(config.proposal_count(), 0);
  r.allocation[0] = config.budget;
  return r;
}

/// An Experiment over an in-memory log with helpers for building teams.
struct Lab {
  explicit Lab(ExperimentConfig c) : ex(std::move(c), log) {}

  /// Joins, names and queues one participant.
  ParticipantId eligible(Timestamp now, std::size_t* position = nullptr) {
    auto id = ex.join(now);
    ex.set_pseudonym(id, "bot-" + id, now);
    std::vector<int> ranking(ex.config().proposal_count());
    for (std::size_t i = 0; i < ranking.size(); ++i) ranking[i] = static_cast<int>(i) + 1;
    auto pos = ex.submit_lobby_survey(id, nlohmann::json::object(), ranking, now);
    if (position) *position = pos;
    return id;
  }

  std::vector<ParticipantId> eligible_many(std::size_t n, Timestamp now) {
    std::vector<ParticipantId> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(eligible(now));
    return ids;
  }

  const TeamState& team(const TeamId& id) const { return ex.state().teams.at(id); }

  std::size_t count(EventKind kind) const {
    return static_cast<std::size_t>(std::count_if(
        log.events().begin(), log.events().end(), [&](const Event& e) { return e.kind == kind; }));
  }

  MemoryEventLog log;
  Experiment ex;
};

/// Loopback run of a cohort file from data/cohorts with its config overrides.
inline bots::LoopbackResult run_cohort_file(const std::string& name,
                                            std::optional<std::uint64_t> seed = {},
                                            EventSink* sink = nullptr) {
  const auto spec = bots::cohort_from_json(read_json(data_path("cohorts/" + name)), seed);
  bots::LoopbackOptions o;
  o.config = bots::apply_overrides(ExperimentConfig::defaults(), spec.config);
  if (!spec.config.contains("seed")) o.config.seed = spec.seed;
  o.scripts = spec.scripts;
  o.token_seed = spec.seed;
  o.sink = sink;
  return bots::run_loopback(o);
}

}  // namespace teamspace::testing
