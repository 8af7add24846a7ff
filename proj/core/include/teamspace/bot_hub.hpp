#pragma once

// Runs a bot cohort against an in-process Gateway on a virtual clock. Every
// input is ordered deterministically, so equal options give byte-identical
// event logs.

#include <vector>

#include "teamspace/bot.hpp"
#include "teamspace/event_log.hpp"
#include "teamspace/gateway.hpp"

namespace teamspace::bots {

struct LoopbackOptions {
  ExperimentConfig config;
  std::vector<BotScript> scripts;
  std::uint64_t token_seed = 1;
  Timestamp epoch = parse_iso8601("2026-01-05T09:00:00.000Z");
  Millis step{50};
  Millis stagger{0};  // bot i starts at epoch + i * stagger
  Millis limit{std::chrono::hours(3)};
  /// Also receives every event (e.g. a JsonlEventLog). Optional.
  EventSink* sink = nullptr;
};

struct LoopbackResult {
  std::vector<Summary> bots;
  std::vector<std::vector<Captured>> captures;  // inbound frames per bot
  std::vector<Event> events;
  SystemState final_state;
  Timestamp ended_at{};
  bool all_finished = false;

  std::size_t violation_count() const;
};

LoopbackResult run_loopback(const LoopbackOptions& options);

/// Applies cohort config overrides on top of `base`.
ExperimentConfig apply_overrides(const ExperimentConfig& base, const nlohmann::json& overrides);

}  // namespace teamspace::bots
