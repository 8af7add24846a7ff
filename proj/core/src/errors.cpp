#include "teamspace/errors.hpp"

namespace teamspace {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::validation:
      return "VALIDATION";
    case ErrorCode::not_found:
      return "NOT_FOUND";
    case ErrorCode::precondition:
      return "PRECONDITION";
    case ErrorCode::phase_closed:
      return "PHASE_CLOSED";
    case ErrorCode::chat_locked:
      return "CHAT_LOCKED";
    case ErrorCode::not_accepting:
      return "NOT_ACCEPTING";
    case ErrorCode::duplicate:
      return "DUPLICATE";
    case ErrorCode::halted:
      return "HALTED";
  }
  return "UNKNOWN";
}

}  // namespace teamspace
