#pragma once

// HTTP + WebSocket transport for a Gateway. One I/O thread owns every socket
// and every call into the gateway, so frames leave in the order the gateway
// produced them.

#include <functional>
#include <memory>
#include <string>

#include "teamspace/clock.hpp"
#include "teamspace/gateway.hpp"

namespace teamspace::net {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 binds an ephemeral port
  Millis tick_interval{100};
  Millis poll_interval{200};  // long-poll recheck period
  std::function<Timestamp()> clock = now_utc;
  /// Called once, on the I/O thread, when the event log fails. The server
  /// stops right after.
  std::function<void(const std::string&)> on_halt;
};

class Server {
 public:
  /// Binds immediately; throws boost::system::system_error if it cannot.
  Server(Gateway& gateway, ServerOptions options);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const noexcept;

  /// Serves on the calling thread until stop() or a halt.
  void run();
  /// Serves on a background thread.
  void start();
  /// Safe from any thread. Joins the background thread if there is one.
  void stop();

  bool halted() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace teamspace::net
