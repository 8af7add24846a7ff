#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "teamspace/clock.hpp"

namespace teamspace {

struct Proposal {
  std::string id;
  std::string title;
  std::string description;
};

struct SurveyItem {
  std::string id;
  std::string text;
  bool reverse = false;
};

/// A multi-item Likert scale scored as the mean of its (reverse-coded) items.
struct SurveyScale {
  std::string name;
  std::vector<SurveyItem> items;
};

struct SurveyConfig {
  int likert_points = 5;
  std::vector<SurveyScale> scales;
  std::vector<SurveyItem> binary_items;
  std::vector<SurveyItem> open_items;
  /// Free-form lobby questions. Answers are stored verbatim.
  std::vector<SurveyItem> demographics;

  const SurveyScale* find_scale(const std::string& name) const;
};

struct ExperimentConfig {
  int team_size = 6;
  int min_team_size = 4;
  Millis discuss{540'000};
  Millis decide{540'000};
  Millis pause{120'000};
  Millis exercise_stage{90'000};
  Millis feedback{30'000};
  Millis exit_survey_timeout{600'000};
  Millis lobby_timeout{1'800'000};
  std::int64_t budget = 500'000;
  std::vector<Proposal> proposals;
  /// Seeds condition assignment.
  std::uint64_t seed = 0;
  SurveyConfig survey;

  /// Reference defaults: teams of six, nine-minute phases, two-minute pause,
  /// five proposals sharing a 500,000 budget.
  static ExperimentConfig defaults();

  /// Throws ValidationError naming the first violated constraint.
  void validate() const;

  std::size_t proposal_count() const noexcept { return proposals.size(); }
};

/// Durations are serialized as "<name>_seconds" numbers (fractions allowed).
void to_json(nlohmann::json& j, const ExperimentConfig& config);

/// Missing keys keep their defaults. Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

}  // namespace teamspace
