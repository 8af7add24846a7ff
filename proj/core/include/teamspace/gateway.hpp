#pragma once

// Transport-agnostic front door: HTTP routes and WebSocket frames in, frames
// out. The network server and the in-process bot hub both drive this class;
// neither talks to Experiment directly.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "teamspace/experiment.hpp"

namespace teamspace {

struct HttpRequest {
  std::string method;
  std::string target;  // path plus optional query
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  /// Long-poll with nothing new yet: the transport may call again until then.
  std::optional<Timestamp> poll_until;
};

using ConnectionId = std::uint64_t;
using TokenSource = std::function<std::string()>;

/// 128-bit tokens from std::random_device.
TokenSource random_tokens();
/// Reproducible tokens for deterministic harness runs.
TokenSource seeded_tokens(std::uint64_t seed);

class Gateway final : private EventListener {
 public:
  using FrameSink = std::function<void(ConnectionId, const std::string&)>;
  using CloseSink = std::function<void(ConnectionId)>;

  Gateway(ExperimentConfig config, EventSink& sink, TokenSource tokens,
          std::filesystem::path static_dir = {});
  /// Continues an existing run. Session tokens are not part of the log, so
  /// participants from `history` cannot reattach.
  Gateway(ExperimentConfig config, EventSink& sink, TokenSource tokens,
          std::span<const Event> history, std::filesystem::path static_dir = {});

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  void set_frame_sink(FrameSink sink);
  /// Called when a newer connection for the same session supersedes one.
  void set_close_sink(CloseSink sink);

  HttpResponse handle_http(const HttpRequest& request, Timestamp now);

  /// Binds a connection to the session behind `token` and sends it a
  /// snapshot. Returns false (after sending an error frame) for an unknown
  /// token; the transport should then close the connection.
  bool on_ws_open(ConnectionId conn, std::string_view token, Timestamp now);
  void on_ws_frame(ConnectionId conn, std::string_view text, Timestamp now);
  void on_ws_close(ConnectionId conn, Timestamp now);

  std::size_t tick(Timestamp now);

  /// True once the event log failed; every later command is refused.
  bool halted() const;

  /// Copy of the current state, taken under the lock.
  SystemState state_copy() const;
  const ExperimentConfig& config() const noexcept { return config_; }

 private:
  void on_event(const Event& event, const SystemState& state) override;
  void send(ConnectionId conn, const nlohmann::json& frame);
  void send_error(ConnectionId conn, ErrorCode code, std::string_view message,
                  std::string_view request);

  HttpResponse route(const HttpRequest& request, Timestamp now);
  HttpResponse serve_static(std::string_view path) const;
  const ParticipantId& session(std::string_view token) const;
  void dispatch_frame(const ParticipantId& who, const nlohmann::json& frame, Timestamp now);

  ExperimentConfig config_;
  TokenSource tokens_;
  std::filesystem::path static_dir_;
  Experiment experiment_;
  FrameSink frame_sink_;
  CloseSink close_sink_;
  bool halted_ = false;

  std::map<std::string, ParticipantId, std::less<>> sessions_;
  std::map<ConnectionId, ParticipantId> connections_;
  std::map<ParticipantId, ConnectionId> live_;

  mutable std::mutex mutex_;
};

}  // namespace teamspace
