#include "teamspace/chatroom.hpp"

#include <algorithm>
#include <cctype>

#include "teamspace/errors.hpp"

namespace teamspace::chat {

std::size_t utf8_length(std::string_view text) noexcept {
  return static_cast<std::size_t>(std::count_if(text.begin(), text.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

std::string_view accept_tag(const TeamState& team) {
  if (team.locked) {
    throw CommandError(ErrorCode::chat_locked, "chat is locked during the team exercise");
  }
  switch (team.phase) {
    case Phase::discuss:
      return kTagDiscuss;
    case Phase::decide:
      return kTagDecide;
    case Phase::interlude:
      if (team.condition == Condition::control) return kTagControlInterlude;
      throw CommandError(ErrorCode::chat_locked, "chat is locked during the team exercise");
    default:
      throw CommandError(ErrorCode::phase_closed,
                         "chat is closed in phase " + std::string(to_string(team.phase)));
  }
}

void validate_body(std::string_view body) {
  const bool blank = std::all_of(body.begin(), body.end(),
                                 [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
  if (blank) throw ValidationError("message body is empty");
  const auto n = utf8_length(body);
  if (n > kMaxMessageLength) {
    throw ValidationError("message body has " + std::to_string(n) + " characters (limit " +
                          std::to_string(kMaxMessageLength) + ")");
  }
}

}  // namespace teamspace::chat
