#pragma once

// The interlude between the two task phases: a timed pause for control teams,
// a three-stage private exercise (self-report, guesses, feedback) for
// intervention teams.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "teamspace/state.hpp"

namespace teamspace::intervention {

/// Announced verbatim to control teams when their pause begins.
inline constexpr std::string_view kControlPausePrompt =
    "The experiment will proceed after a brief two-minute pause. Use this time to revisit the "
    "messages exchanged in the conversation so far and reflect on how the experience of "
    "working with this group has been.";

/// Each active member is asked to guess every other active member.
std::map<ParticipantId, std::vector<ParticipantId>> build_rosters(const TeamState& team);

/// Throws CommandError unless `who` may submit a self-report now.
void check_self_report(const TeamState& team, const ParticipantId& who, int score);

/// Throws CommandError unless the guesses cover exactly the member's roster.
/// Targets that dropped out after the roster was pushed may be included or
/// omitted.
void check_guesses(const TeamState& team, const ParticipantId& who,
                   const std::map<ParticipantId, int>& guesses);

bool self_reports_complete(const TeamState& team);
bool guesses_complete(const TeamState& team);

/// Climate over the reports present and one accuracy per member who guessed.
FeedbackRecord compute_feedback(const ExerciseState& exercise);

nlohmann::json to_json(const FeedbackRecord& feedback);

/// One decimal place, e.g. "2.0" or "-0.3".
std::string format_climate(double climate);

/// What `member` is shown: the shared climate and their own accuracy only.
nlohmann::json feedback_view(const FeedbackRecord& feedback, const ParticipantId& member);

}  // namespace teamspace::intervention
