#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace teamspace {

using Millis = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<Millis>;

/// "2026-10-16T09:30:00.250Z"
std::string to_iso8601(Timestamp t);

/// Inverse of to_iso8601. Throws std::invalid_argument on malformed input.
Timestamp parse_iso8601(std::string_view text);

inline Timestamp now_utc() {
  return std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now());
}

}  // namespace teamspace
