#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "teamspace/event.hpp"

namespace teamspace {

/// Destination for accepted events. append() must make the event durable (as
/// far as its policy promises) before returning; it throws on failure.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void append(const Event& event) = 0;
};

class MemoryEventLog : public EventSink {
 public:
  void append(const Event& event) override;
  const std::vector<Event>& events() const noexcept { return events_; }

 private:
  std::vector<Event> events_;
};

enum class FsyncPolicy {
  per_event,  // fsync after every line
  batched,    // fsync every `batch_size` lines and on close
  none,       // leave it to the OS
};

/// JSON Lines file, one event per line, opened for append.
class JsonlEventLog : public EventSink {
 public:
  JsonlEventLog(const std::filesystem::path& path, FsyncPolicy policy = FsyncPolicy::per_event,
                std::size_t batch_size = 64);
  ~JsonlEventLog() override;

  JsonlEventLog(const JsonlEventLog&) = delete;
  JsonlEventLog& operator=(const JsonlEventLog&) = delete;

  /// Validates the event and its sequence number, then writes it. Throws
  /// ValidationError (nothing written) or PersistenceError.
  void append(const Event& event) override;
  void sync();

  const std::filesystem::path& path() const noexcept { return path_; }
  std::uint64_t last_seq() const noexcept { return last_seq_; }

 private:
  std::filesystem::path path_;
  FsyncPolicy policy_;
  std::size_t batch_size_;
  std::size_t unsynced_ = 0;
  std::uint64_t last_seq_ = 0;
  int fd_ = -1;
  std::mutex mutex_;
};

/// Reads a JSON Lines log. A final line without a terminating newline that
/// does not parse is treated as a torn write and dropped. Any other malformed
/// line throws ReplayError naming the 1-based line.
std::vector<Event> read_event_log(std::istream& in);
std::vector<Event> read_event_log(const std::filesystem::path& path);

void write_event_log(const std::filesystem::path& path, std::span<const Event> events);

/// Throws ReplayError unless seq runs 1, 2, 3, ... without gaps.
void validate_sequence(std::span<const Event> events);

}  // namespace teamspace
