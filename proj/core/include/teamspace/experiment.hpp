#pragma once

// The experiment state machine. Every command validates against the current
// state, then emits events; an event is appended to the sink before it is
// applied and before listeners hear about it.

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "teamspace/config.hpp"
#include "teamspace/event_log.hpp"
#include "teamspace/state.hpp"

namespace teamspace {

class EventListener {
 public:
  virtual ~EventListener() = default;
  /// Called after `event` has been persisted and applied to `state`.
  virtual void on_event(const Event& event, const SystemState& state) = 0;
};

/// Conditions the seeded source assigns to the first `count` teams.
std::vector<Condition> condition_sequence(std::uint64_t seed, std::size_t count);

class Experiment {
 public:
  Experiment(ExperimentConfig config, EventSink& sink, EventListener* listener = nullptr);

  /// Rebuilds from an existing log; new events continue its sequence.
  static Experiment resume(ExperimentConfig config, EventSink& sink,
                           std::span<const Event> history, EventListener* listener = nullptr);

  const ExperimentConfig& config() const noexcept { return config_; }
  const SystemState& state() const noexcept { return state_; }

  ParticipantId join(Timestamp now);
  void set_pseudonym(const ParticipantId& who, const std::string& pseudonym, Timestamp now);

  /// Records the lobby survey and queues the participant. Returns the
  /// 1-based lobby position at enqueue time. Teams form immediately when
  /// enough participants are waiting.
  std::size_t submit_lobby_survey(const ParticipantId& who, const nlohmann::json& demographics,
                                  const std::vector<int>& ranking, Timestamp now);

  /// Forms as many full teams as the lobby allows, FIFO.
  std::vector<TeamId> form_teams(Timestamp now);

  /// Advances every team whose deadline has passed. Returns the number of
  /// events emitted. Calling it twice with the same time emits nothing new.
  std::size_t tick(Timestamp now);

  void disconnect(const ParticipantId& who, Timestamp now);
  void reconnect(const ParticipantId& who, Timestamp now);

  ChatEntry post_message(const ParticipantId& who, const std::string& body, Timestamp now);
  void signal_done(const ParticipantId& who, Timestamp now);
  void submit_team_ranking(const ParticipantId& who, const std::vector<int>& ranking,
                           bool agreed, Timestamp now);
  void submit_team_allocation(const ParticipantId& who, const std::vector<std::int64_t>& amounts,
                              Timestamp now);

  void submit_self_report(const ParticipantId& who, int score, Timestamp now);
  void submit_guesses(const ParticipantId& who, const std::map<ParticipantId, int>& guesses,
                      Timestamp now);
  void acknowledge_feedback(const ParticipantId& who, Timestamp now);

  void submit_exit_survey(const ParticipantId& who, const ExitSurveyResponse& response,
                          Timestamp now);

 private:
  void emit(Timestamp now, EventKind kind, std::optional<TeamId> team,
            std::optional<ParticipantId> who, nlohmann::json payload);

  const ParticipantState& participant(const ParticipantId& who) const;
  const TeamState& team(const TeamId& id) const { return state_.teams.at(id); }
  const TeamState& active_team_of(const ParticipantId& who) const;

  void announce(const TeamId& team, const std::string& text, Timestamp now);
  void start_phase(const TeamId& team, Phase phase, Millis duration, Timestamp now,
                   nlohmann::json extra = nlohmann::json::object());

  void begin_interlude(const TeamId& team, Timestamp now);
  void start_guessing(const TeamId& team, Timestamp now);
  void start_feedback(const TeamId& team, Timestamp now);
  void finish_exercise(const TeamId& team, Timestamp now);
  void start_decide(const TeamId& team, Timestamp now);
  void start_exit_survey(const TeamId& team, Timestamp now);
  void complete(const TeamId& team, Timestamp now);
  void terminate(const TeamId& team, Timestamp now);

  /// Deadline-driven transition out of the current phase or stage.
  void advance(const TeamId& team, Timestamp now);
  /// Early transition when everyone still active has finished their part.
  void advance_if_settled(const TeamId& team, Timestamp now);

  std::string clock_text(Millis d) const;

  ExperimentConfig config_;
  EventSink& sink_;
  EventListener* listener_;
  SystemState state_;
  std::mt19937_64 condition_rng_;

  // Early-finish signals and feedback acknowledgements. Cleared at every
  // phase or stage change and not part of the logged state.
  std::map<TeamId, std::set<ParticipantId>> done_;
  std::map<TeamId, std::set<ParticipantId>> acks_;
};

}  // namespace teamspace
