#pragma once

#include <cstddef>
#include <string_view>

#include "teamspace/state.hpp"

namespace teamspace::chat {

/// Upper bound on a message body, in UTF-8 code points.
inline constexpr std::size_t kMaxMessageLength = 2000;

/// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t utf8_length(std::string_view text) noexcept;

/// Phase tag a message posted right now would carry. Throws CommandError
/// with chat_locked while the exercise holds the lock, phase_closed outside
/// the chat phases.
std::string_view accept_tag(const TeamState& team);

/// Throws ValidationError for an empty (all-whitespace) or oversized body.
void validate_body(std::string_view body);

/// Whether moving the lock to `locked` changes anything. Lock and unlock are
/// idempotent and a no-op request emits no event.
inline bool lock_transition_needed(const TeamState& team, bool locked) noexcept {
  return team.locked != locked;
}

}  // namespace teamspace::chat
