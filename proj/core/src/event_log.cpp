#include "teamspace/event_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "teamspace/errors.hpp"

namespace teamspace {

void MemoryEventLog::append(const Event& event) {
  validate_event(event);
  const std::uint64_t expected = events_.empty() ? 1 : events_.back().seq + 1;
  if (event.seq != expected) {
    throw PersistenceError("event_seq " + std::to_string(event.seq) + " out of order (expected " +
                           std::to_string(expected) + ")");
  }
  events_.push_back(event);
}

JsonlEventLog::JsonlEventLog(const std::filesystem::path& path, FsyncPolicy policy,
                             std::size_t batch_size)
    : path_(path), policy_(policy), batch_size_(batch_size == 0 ? 1 : batch_size) {
  if (path_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
    if (ec) throw PersistenceError("cannot create " + path_.parent_path().string() + ": " + ec.message());
  }
  // Resume after an existing prefix so sequence numbers stay gap-free.
  if (std::filesystem::exists(path_)) {
    auto existing = read_event_log(path_);
    validate_sequence(existing);
    if (!existing.empty()) last_seq_ = existing.back().seq;
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw PersistenceError("cannot open " + path_.string() + ": " + std::strerror(errno));
}

JsonlEventLog::~JsonlEventLog() {
  if (fd_ >= 0) {
    if (policy_ != FsyncPolicy::none) ::fsync(fd_);
    ::close(fd_);
  }
}

void JsonlEventLog::append(const Event& event) {
  validate_event(event);
  std::lock_guard lock(mutex_);
  if (event.seq != last_seq_ + 1) {
    throw PersistenceError("event_seq " + std::to_string(event.seq) + " out of order (expected " +
                           std::to_string(last_seq_ + 1) + ")");
  }
  std::string line = serialize_event(event);
  line.push_back('\n');
  std::size_t written = 0;
  while (written < line.size()) {
    const auto n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw PersistenceError("write to " + path_.string() + " failed: " + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  ++unsynced_;
  if (policy_ == FsyncPolicy::per_event ||
      (policy_ == FsyncPolicy::batched && unsynced_ >= batch_size_)) {
    if (::fsync(fd_) != 0) {
      throw PersistenceError("fsync of " + path_.string() + " failed: " + std::strerror(errno));
    }
    unsynced_ = 0;
  }
  last_seq_ = event.seq;
}

void JsonlEventLog::sync() {
  std::lock_guard lock(mutex_);
  if (::fsync(fd_) != 0) {
    throw PersistenceError("fsync of " + path_.string() + " failed: " + std::strerror(errno));
  }
  unsynced_ = 0;
}

std::vector<Event> read_event_log(std::istream& in) {
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const bool terminated = !in.eof();
    if (line.empty()) {
      if (terminated) throw ReplayError(line_no, "empty line");
      break;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      if (!terminated) break;  // torn final write
      throw ReplayError(line_no, std::string("unparsable line: ") + e.what());
    }
    try {
      events.push_back(event_from_json(j));
    } catch (const std::exception& e) {
      throw ReplayError(line_no, e.what());
    }
  }
  return events;
}

std::vector<Event> read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open event log " + path.string());
  return read_event_log(in);
}

void write_event_log(const std::filesystem::path& path, std::span<const Event> events) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot write " + path.string());
  for (const auto& e : events) out << serialize_event(e) << '\n';
  if (!out) throw PersistenceError("write to " + path.string() + " failed");
}

void validate_sequence(std::span<const Event> events) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].seq != i + 1) {
      throw ReplayError(i + 1, "expected event_seq " + std::to_string(i + 1) + ", found " +
                                   std::to_string(events[i].seq));
    }
  }
}

}  // namespace teamspace
