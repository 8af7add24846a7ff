#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace teamspace {

/// Wire-level error codes. The string form is what clients see.
enum class ErrorCode {
  validation,
  not_found,
  precondition,
  phase_closed,
  chat_locked,
  not_accepting,
  duplicate,
  halted,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Rejected command. State is unchanged when this is thrown.
class CommandError : public std::runtime_error {
 public:
  CommandError(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Input outside a domain type's invariants.
class ValidationError : public CommandError {
 public:
  explicit ValidationError(const std::string& message)
      : CommandError(ErrorCode::validation, message) {}
};

/// The event log could not be written. The run must not continue.
class PersistenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A log failed sequence or schema validation while being read back.
class ReplayError : public std::runtime_error {
 public:
  ReplayError(std::size_t offset, const std::string& message)
      : std::runtime_error("event log offset " + std::to_string(offset) + ": " + message),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Recomputed measures disagree with values recorded in the log.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace teamspace
