#pragma once

// Wire shapes shared by the server and the bot harness. Every frame is a JSON
// envelope {type, seq?, payload}; `seq` is the event sequence number the
// frame was derived from.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "teamspace/config.hpp"
#include "teamspace/errors.hpp"
#include "teamspace/state.hpp"

namespace teamspace::protocol {

namespace frame {
// client -> server
inline constexpr std::string_view post_message = "post_message";
inline constexpr std::string_view done_signal = "done_signal";
inline constexpr std::string_view exercise_submit = "exercise_submit";
inline constexpr std::string_view ack = "ack";
// server -> client
inline constexpr std::string_view message = "message";
inline constexpr std::string_view system = "system";
inline constexpr std::string_view phase_change = "phase_change";
inline constexpr std::string_view lock_state = "lock_state";
inline constexpr std::string_view exercise_prompt = "exercise_prompt";
inline constexpr std::string_view exercise_feedback = "exercise_feedback";
inline constexpr std::string_view team_terminated = "team_terminated";
inline constexpr std::string_view state_snapshot = "state_snapshot";
inline constexpr std::string_view error = "error";
}  // namespace frame

bool is_server_frame_type(std::string_view type) noexcept;

nlohmann::json envelope(std::string_view type, nlohmann::json payload,
                        std::optional<std::uint64_t> seq = std::nullopt);

nlohmann::json error_payload(ErrorCode code, std::string_view message);

/// HTTP status for a rejected command.
int http_status(ErrorCode code) noexcept;

/// Everything `who` may see right now. Exercise entries are reduced to
/// booleans about the participant's own submissions.
nlohmann::json snapshot(const SystemState& state, const ParticipantId& who,
                        const ExperimentConfig& config, Timestamp now);

/// Proposals, budget, durations and survey items as served to clients.
nlohmann::json public_config(const ExperimentConfig& config);

/// Frames produced by one applied event, addressed by participant. Only
/// members listed here may receive them.
std::vector<std::pair<ParticipantId, nlohmann::json>> frames_for_event(
    const Event& event, const SystemState& after, const ExperimentConfig& config);

}  // namespace teamspace::protocol
