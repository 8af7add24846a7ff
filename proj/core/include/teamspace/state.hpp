#pragma once

// System state as reconstructed from the event log. The live server and
// offline replay both build it exclusively through apply().

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "teamspace/clock.hpp"
#include "teamspace/event.hpp"
#include "teamspace/sociometrics.hpp"

namespace teamspace {

using TeamId = std::string;

enum class Condition { control, intervention };
enum class Phase { discuss, interlude, decide, exit_survey, terminated, complete };
enum class ExerciseStage { self_report, guessing, feedback, done };

std::string_view to_string(Condition c) noexcept;
std::string_view to_string(Phase p) noexcept;
std::string_view to_string(ExerciseStage s) noexcept;
Condition condition_from_string(std::string_view s);
Phase phase_from_string(std::string_view s);
ExerciseStage stage_from_string(std::string_view s);

/// Chat phase tags. Messages are never tagged with the intervention interlude.
inline constexpr std::string_view kTagDiscuss = "discuss";
inline constexpr std::string_view kTagDecide = "decide";
inline constexpr std::string_view kTagControlInterlude = "interlude-control";

struct ParticipantState {
  ParticipantId id;
  Timestamp joined_at{};
  std::optional<std::string> pseudonym;
  nlohmann::json demographics;  // null until the lobby survey
  std::optional<std::vector<int>> lobby_ranking;
  bool connected = true;
  std::optional<TeamId> team_id;
  bool released = false;  // left the lobby without a team
};

struct ChatEntry {
  std::uint64_t message_id = 0;
  bool system = false;
  ParticipantId sender_id;  // empty for system entries
  std::string sender;       // pseudonym or "system"
  std::string body;
  Timestamp sent_at{};
  std::string phase;  // tag for member messages, team phase name for system entries
};

struct FeedbackRecord {
  std::optional<double> climate;
  std::map<ParticipantId, std::optional<AccuracyResult>> accuracies;
};

struct ExerciseState {
  ExerciseStage stage = ExerciseStage::self_report;
  Timestamp stage_deadline{};
  std::map<ParticipantId, int> self_reports;
  std::map<ParticipantId, std::map<ParticipantId, int>> guess_sets;
  /// Targets each member still owes a guess for. Dropouts are removed.
  std::map<ParticipantId, std::vector<ParticipantId>> rosters;
  /// Rosters exactly as pushed when Guessing began.
  std::map<ParticipantId, std::vector<ParticipantId>> pushed_rosters;
  std::optional<FeedbackRecord> feedback;
};

struct TeamRankingRecord {
  std::vector<int> ranking;
  bool agreed = false;
  ParticipantId submitter;
};

struct TeamAllocationRecord {
  std::vector<std::int64_t> amounts;
  ParticipantId submitter;
};

struct ExitSurveyResponse {
  std::map<std::string, int> likert;
  std::map<std::string, bool> binary;
  std::map<std::string, std::string> open;
  std::vector<std::int64_t> allocation;
};

struct TeamState {
  TeamId id;
  Condition condition = Condition::control;
  Timestamp formed_at{};
  std::vector<ParticipantId> members;
  std::set<ParticipantId> active;
  /// Phase in which each currently-disconnected member dropped out.
  std::map<ParticipantId, Phase> disconnected_in;
  Phase phase = Phase::discuss;
  std::optional<Timestamp> deadline;
  std::vector<Phase> history;
  bool locked = false;
  std::uint64_t next_message_id = 1;
  std::vector<ChatEntry> transcript;
  std::optional<ExerciseState> exercise;
  std::optional<TeamRankingRecord> team_ranking;
  std::optional<TeamAllocationRecord> allocation;
  std::map<ParticipantId, ExitSurveyResponse> exit_surveys;
  std::optional<Timestamp> ended_at;
  std::optional<std::string> termination_reason;

  bool finished() const noexcept {
    return phase == Phase::terminated || phase == Phase::complete;
  }
  bool is_active(const ParticipantId& p) const { return active.contains(p); }
};

struct SystemState {
  std::uint64_t last_seq = 0;
  std::map<ParticipantId, ParticipantState> participants;
  std::map<TeamId, TeamState> teams;
  /// Eligible participants waiting for a team, in arrival order.
  std::vector<ParticipantId> lobby;
  std::map<ParticipantId, Timestamp> lobby_since;

  const ParticipantState* find_participant(const ParticipantId& id) const;
  const TeamState* find_team(const TeamId& id) const;
  const TeamState* team_of(const ParticipantId& id) const;
};

/// Applies one already-validated event. Throws ReplayError (offset = seq)
/// when the event does not fit the current state.
void apply(SystemState& state, const Event& event);

/// Validates the sequence and folds every event into a fresh state.
SystemState replay(std::span<const Event> events);

/// Canonical JSON rendering used for bit-identical comparisons.
nlohmann::json to_json(const SystemState& state);

nlohmann::json to_json(const ExitSurveyResponse& r);
ExitSurveyResponse exit_survey_from_json(const nlohmann::json& j);

nlohmann::json to_json(const std::optional<AccuracyResult>& r);

}  // namespace teamspace
