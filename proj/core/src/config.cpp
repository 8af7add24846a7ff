#include "teamspace/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "teamspace/errors.hpp"

namespace teamspace {
namespace {

std::vector<Proposal> default_proposals() {
  return {
      {"arts", "Community arts program",
       "Establish a community arts program featuring art, music, and dance programs for "
       "children and adults."},
      {"tourism", "Tourist bureau",
       "Create a tourist bureau to develop advertising and other methods of attracting "
       "tourism into the community."},
      {"library", "Library volumes",
       "Purchase additional volumes for the community's library system."},
      {"shelter", "Homeless shelter",
       "Establish an additional shelter for the homeless in the community."},
      {"gallery", "Gallery art",
       "Purchase art for display in the community's art gallery."},
  };
}

SurveyConfig default_survey() {
  SurveyConfig s;
  s.scales = {
      {"viability",
       {{"viability_1",
         "Most of the members of this team would welcome the opportunity to work as a group "
         "again in the future",
         false},
        {"viability_2", "As a team this work group shows signs of falling apart.", true},
        {"viability_3", "The members of this team could work together for a long time.",
         false}}},
      {"task_conflict",
       {{"task_conflict_1", "there was a lot of conflict of ideas in our group", false},
        {"task_conflict_2",
         "my team had frequent disagreements relating to the task we were assigned.", false}}},
      {"relationship_conflict",
       {{"relationship_conflict_1", "people in my team often got angry while working together.",
         false},
        {"relationship_conflict_2", "there was a lot of relationship tension in my group.",
         false}}},
      {"satisfaction", {{"satisfaction_1", "I am satisfied with my team's final solution", false}}},
  };
  s.binary_items = {
      {"willing_give_feedback",
       "Would you be willing to give feedback to other members of this group on their teamwork "
       "practices? (Optional; we may follow up later.)",
       false},
      {"willing_receive_feedback",
       "Would you be willing to receive feedback from other members of your team on your "
       "teamwork practices?",
       false},
  };
  s.open_items = {
      {"openness", "Would you describe the conversation in your group as open or guarded? Why?",
       false},
      {"engagement_second_stage", "How did you engage with the group in the second stage?",
       false},
  };
  s.demographics = {
      {"age_range", "Age range", false},
      {"gender", "Gender (optional)", false},
      {"team_experience", "How often do you work in teams?", false},
  };
  return s;
}

double seconds_of(Millis d) { return static_cast<double>(d.count()) / 1000.0; }

Millis millis_of(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ValidationError(key + " must be a number of seconds");
  const double s = v.get<double>();
  if (!std::isfinite(s)) throw ValidationError(key + " must be finite");
  return Millis{static_cast<Millis::rep>(std::llround(s * 1000.0))};
}

void items_to_json(nlohmann::json& out, const std::vector<SurveyItem>& items) {
  out = nlohmann::json::array();
  for (const auto& it : items) {
    nlohmann::json j = {{"id", it.id}, {"text", it.text}};
    if (it.reverse) j["reverse"] = true;
    out.push_back(std::move(j));
  }
}

std::vector<SurveyItem> items_from_json(const nlohmann::json& j) {
  std::vector<SurveyItem> items;
  for (const auto& e : j) {
    items.push_back({e.at("id").get<std::string>(), e.value("text", std::string{}),
                     e.value("reverse", false)});
  }
  return items;
}

}  // namespace

const SurveyScale* SurveyConfig::find_scale(const std::string& name) const {
  for (const auto& s : scales) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.proposals = default_proposals();
  c.survey = default_survey();
  return c;
}

void ExperimentConfig::validate() const {
  if (min_team_size < 2) throw ValidationError("min_team_size must be at least 2");
  if (team_size < min_team_size) throw ValidationError("team_size must be >= min_team_size");
  if (proposals.size() < 2) throw ValidationError("at least two proposals are required");
  if (budget <= 0) throw ValidationError("budget must be positive");
  for (auto [name, d] : {std::pair{"discuss", discuss}, {"decide", decide}, {"pause", pause},
                         {"exercise_stage", exercise_stage}, {"feedback", feedback},
                         {"exit_survey_timeout", exit_survey_timeout},
                         {"lobby_timeout", lobby_timeout}}) {
    if (d.count() <= 0) throw ValidationError(std::string(name) + " duration must be positive");
  }
  std::set<std::string> ids;
  for (const auto& p : proposals) {
    if (p.id.empty() || !ids.insert(p.id).second) {
      throw ValidationError("proposal ids must be non-empty and unique");
    }
  }
  if (survey.likert_points < 2) throw ValidationError("likert_points must be at least 2");
  std::set<std::string> item_ids;
  auto claim = [&](const SurveyItem& it) {
    if (it.id.empty() || !item_ids.insert(it.id).second) {
      throw ValidationError("survey item ids must be non-empty and unique: '" + it.id + "'");
    }
  };
  for (const auto& s : survey.scales) {
    if (s.items.empty()) throw ValidationError("scale " + s.name + " has no items");
    for (const auto& it : s.items) claim(it);
  }
  for (const auto& it : survey.binary_items) claim(it);
  for (const auto& it : survey.open_items) claim(it);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json::object();
  j["team_size"] = c.team_size;
  j["min_team_size"] = c.min_team_size;
  j["discuss_seconds"] = seconds_of(c.discuss);
  j["decide_seconds"] = seconds_of(c.decide);
  j["pause_seconds"] = seconds_of(c.pause);
  j["exercise_stage_seconds"] = seconds_of(c.exercise_stage);
  j["feedback_seconds"] = seconds_of(c.feedback);
  j["exit_survey_timeout_seconds"] = seconds_of(c.exit_survey_timeout);
  j["lobby_timeout_seconds"] = seconds_of(c.lobby_timeout);
  j["budget"] = c.budget;
  j["seed"] = c.seed;
  auto& props = j["proposals"] = nlohmann::json::array();
  for (const auto& p : c.proposals) {
    props.push_back({{"id", p.id}, {"title", p.title}, {"description", p.description}});
  }
  auto& survey = j["survey"];
  survey["likert_points"] = c.survey.likert_points;
  auto& scales = survey["scales"] = nlohmann::json::array();
  for (const auto& s : c.survey.scales) {
    nlohmann::json sj = {{"name", s.name}};
    items_to_json(sj["items"], s.items);
    scales.push_back(std::move(sj));
  }
  items_to_json(survey["binary_items"], c.survey.binary_items);
  items_to_json(survey["open_items"], c.survey.open_items);
  items_to_json(survey["demographics"], c.survey.demographics);
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  auto c = ExperimentConfig::defaults();
  static const std::set<std::string> known = {
      "team_size",       "min_team_size",  "discuss_seconds",
      "decide_seconds",  "pause_seconds",  "exercise_stage_seconds",
      "feedback_seconds", "exit_survey_timeout_seconds", "lobby_timeout_seconds",
      "budget",          "seed",           "proposals",
      "survey"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ValidationError("unknown config key: " + key);
  }
  try {
    if (j.contains("team_size")) c.team_size = j["team_size"].get<int>();
    if (j.contains("min_team_size")) c.min_team_size = j["min_team_size"].get<int>();
    auto dur = [&](const char* key, Millis& out) {
      if (j.contains(key)) out = millis_of(j[key], key);
    };
    dur("discuss_seconds", c.discuss);
    dur("decide_seconds", c.decide);
    dur("pause_seconds", c.pause);
    dur("exercise_stage_seconds", c.exercise_stage);
    dur("feedback_seconds", c.feedback);
    dur("exit_survey_timeout_seconds", c.exit_survey_timeout);
    dur("lobby_timeout_seconds", c.lobby_timeout);
    if (j.contains("budget")) c.budget = j["budget"].get<std::int64_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("proposals")) {
      c.proposals.clear();
      for (const auto& p : j["proposals"]) {
        c.proposals.push_back({p.at("id").get<std::string>(), p.value("title", std::string{}),
                               p.value("description", std::string{})});
      }
    }
    if (j.contains("survey")) {
      const auto& s = j["survey"];
      if (s.contains("likert_points")) c.survey.likert_points = s["likert_points"].get<int>();
      if (s.contains("scales")) {
        c.survey.scales.clear();
        for (const auto& sj : s["scales"]) {
          c.survey.scales.push_back({sj.at("name").get<std::string>(), items_from_json(sj.at("items"))});
        }
      }
      if (s.contains("binary_items")) c.survey.binary_items = items_from_json(s["binary_items"]);
      if (s.contains("open_items")) c.survey.open_items = items_from_json(s["open_items"]);
      if (s.contains("demographics")) c.survey.demographics = items_from_json(s["demographics"]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace teamspace
