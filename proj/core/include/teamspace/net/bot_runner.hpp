#pragma once

// Drives a bot cohort against a live server over real sockets. Each bot gets
// its own thread and I/O context; the bots share nothing but the server.

#include <string>
#include <vector>

#include "teamspace/bot.hpp"

namespace teamspace::net {

struct NetworkOptions {
  std::string server_url = "http://127.0.0.1:8080";
  std::vector<bots::BotScript> scripts;
  Millis stagger{0};
  Millis limit{std::chrono::minutes(30)};
  /// Once every bot is either finished or waiting in the lobby, how long to
  /// wait for a team to form before giving up on the stragglers.
  Millis lobby_grace{std::chrono::seconds(3)};
};

struct NetworkResult {
  std::vector<bots::Summary> bots;
  std::vector<std::vector<bots::Captured>> captures;
  bool all_finished = false;
  bool timed_out = false;
  Millis elapsed{0};

  std::size_t violation_count() const;
};

struct Endpoint {
  std::string host;
  std::string port;
};

/// "http://host[:port][/]". Throws std::invalid_argument otherwise.
Endpoint parse_server_url(const std::string& url);

NetworkResult run_network(const NetworkOptions& options);

}  // namespace teamspace::net
