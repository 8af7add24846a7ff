#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "teamspace/clock.hpp"

namespace teamspace {

enum class EventKind {
  participant_joined,
  pseudonym_set,
  lobby_survey_submitted,
  team_formed,
  phase_started,
  message_posted,
  system_announced,
  chat_locked,
  chat_unlocked,
  self_report_submitted,
  guesses_submitted,
  feedback_computed,
  team_ranking_submitted,
  team_allocation_submitted,
  exit_survey_submitted,
  participant_disconnected,
  participant_reconnected,
  team_terminated,
  team_completed,
};

inline constexpr std::size_t kEventKindCount = 19;

std::string_view to_string(EventKind kind) noexcept;
std::optional<EventKind> event_kind_from_string(std::string_view name) noexcept;

/// One entry of the append-only log. `session_id` carries the participant id
/// (never the secret session token).
struct Event {
  std::uint64_t seq = 0;
  Timestamp wall_time{};
  std::optional<std::string> team_id;
  std::optional<std::string> session_id;
  EventKind kind = EventKind::participant_joined;
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const Event&, const Event&) = default;
};

nlohmann::json to_json(const Event& event);

/// Throws std::invalid_argument on a missing field, an unknown kind, or a
/// malformed timestamp.
Event event_from_json(const nlohmann::json& j);

/// Compact JSON, keys sorted, no trailing newline.
std::string serialize_event(const Event& event);

/// Checks that the payload carries the fields its kind requires and that
/// team- and participant-scoped kinds name their scope. Throws ValidationError.
void validate_event(const Event& event);

}  // namespace teamspace
