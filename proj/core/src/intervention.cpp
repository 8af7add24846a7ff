#include "teamspace/intervention.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "teamspace/errors.hpp"

namespace teamspace::intervention {
namespace {

const ExerciseState& exercise_in(const TeamState& team, ExerciseStage stage) {
  if (team.phase != Phase::interlude || team.condition != Condition::intervention ||
      !team.exercise) {
    throw CommandError(ErrorCode::phase_closed, "no exercise in progress");
  }
  if (team.exercise->stage != stage) {
    throw CommandError(ErrorCode::phase_closed,
                       "exercise is in stage " + std::string(to_string(team.exercise->stage)));
  }
  return *team.exercise;
}

void require_active(const TeamState& team, const ParticipantId& who) {
  if (!team.is_active(who)) {
    throw CommandError(ErrorCode::not_accepting, who + " is not an active member of " + team.id);
  }
}

std::string join(const std::vector<ParticipantId>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

}  // namespace

std::map<ParticipantId, std::vector<ParticipantId>> build_rosters(const TeamState& team) {
  std::map<ParticipantId, std::vector<ParticipantId>> rosters;
  for (const auto& member : team.members) {
    if (!team.is_active(member)) continue;
    auto& roster = rosters[member];
    for (const auto& other : team.members) {
      if (other != member && team.is_active(other)) roster.push_back(other);
    }
  }
  return rosters;
}

void check_self_report(const TeamState& team, const ParticipantId& who, int score) {
  const auto& ex = exercise_in(team, ExerciseStage::self_report);
  require_active(team, who);
  (void)EmotionScore{score};
  if (ex.self_reports.contains(who)) {
    throw CommandError(ErrorCode::duplicate, who + " already submitted a self-report");
  }
}

void check_guesses(const TeamState& team, const ParticipantId& who,
                   const std::map<ParticipantId, int>& guesses) {
  const auto& ex = exercise_in(team, ExerciseStage::guessing);
  require_active(team, who);
  if (ex.guess_sets.contains(who)) {
    throw CommandError(ErrorCode::duplicate, who + " already submitted guesses");
  }
  auto owed = ex.rosters.find(who);
  auto pushed = ex.pushed_rosters.find(who);
  if (owed == ex.rosters.end() || pushed == ex.pushed_rosters.end()) {
    throw CommandError(ErrorCode::not_accepting, who + " has no roster in this exercise");
  }
  if (guesses.contains(who)) throw ValidationError("guesses may not include yourself");

  std::vector<ParticipantId> missing;
  for (const auto& target : owed->second) {
    if (!guesses.contains(target)) missing.push_back(target);
  }
  std::vector<ParticipantId> extra;
  for (const auto& [target, score] : guesses) {
    (void)EmotionScore{score};
    const auto& roster = pushed->second;
    if (std::find(roster.begin(), roster.end(), target) == roster.end()) extra.push_back(target);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "guesses do not match roster";
    if (!missing.empty()) msg += "; missing: " + join(missing);
    if (!extra.empty()) msg += "; not on roster: " + join(extra);
    throw ValidationError(msg);
  }
}

bool self_reports_complete(const TeamState& team) {
  if (!team.exercise) return false;
  return std::all_of(team.active.begin(), team.active.end(), [&](const ParticipantId& p) {
    return team.exercise->self_reports.contains(p);
  });
}

bool guesses_complete(const TeamState& team) {
  if (!team.exercise) return false;
  const auto& ex = *team.exercise;
  return std::all_of(team.active.begin(), team.active.end(), [&](const ParticipantId& p) {
    return !ex.rosters.contains(p) || ex.guess_sets.contains(p);
  });
}

FeedbackRecord compute_feedback(const ExerciseState& ex) {
  FeedbackRecord f;
  std::map<ParticipantId, EmotionScore> actuals;
  std::vector<EmotionScore> reports;
  for (const auto& [who, score] : ex.self_reports) {
    actuals.emplace(who, EmotionScore{score});
    reports.emplace_back(score);
  }
  if (!reports.empty()) f.climate = group_climate(reports);
  for (const auto& [who, raw] : ex.guess_sets) {
    GuessSet g{who, {}};
    for (const auto& [target, score] : raw) g.guesses.emplace(target, EmotionScore{score});
    f.accuracies[who] = perception_accuracy(g, actuals);
  }
  return f;
}

nlohmann::json to_json(const FeedbackRecord& f) {
  nlohmann::json j;
  j["climate"] = f.climate ? nlohmann::json(*f.climate) : nlohmann::json(nullptr);
  auto& acc = j["accuracies"] = nlohmann::json::object();
  for (const auto& [who, r] : f.accuracies) acc[who] = teamspace::to_json(r);
  return j;
}

std::string format_climate(double climate) {
  // Half away from zero at one decimal; climate is k/n for small n so ties are exact.
  const double scaled = std::round(climate * 10.0);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", scaled / 10.0);
  std::string s = buf;
  if (s == "-0.0") s = "0.0";
  return s;
}

nlohmann::json feedback_view(const FeedbackRecord& f, const ParticipantId& member) {
  nlohmann::json view;
  if (f.climate) {
    view["climate"] = *f.climate;
    view["climate_display"] = format_climate(*f.climate);
  } else {
    view["climate"] = nullptr;
    view["climate_display"] = "unavailable";
  }
  view["own_accuracy_percent"] = nullptr;
  view["evaluated_targets"] = 0;
  if (auto it = f.accuracies.find(member); it != f.accuracies.end() && it->second) {
    view["own_accuracy_percent"] = it->second->percent();
    view["evaluated_targets"] = it->second->evaluated_targets;
  }
  return view;
}

}  // namespace teamspace::intervention
