#pragma once

// Scripted participants. A Bot is a pure reaction machine: it turns HTTP
// responses, server frames and the passage of time into actions, and leaves
// the actual I/O to a driver (the in-process hub or a network runner).

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "teamspace/clock.hpp"
#include "teamspace/gateway.hpp"
#include "teamspace/state.hpp"

namespace teamspace::bots {

enum class GuessPolicy { truthful_mirror, random, constant };

struct DisconnectScript {
  Phase phase = Phase::discuss;
  Millis after{1000};
  std::optional<Millis> reconnect_after;
};

struct Persona {
  int chattiness = 2;  // member messages per chat phase
  std::string corpus = "neutral";  // neutral | second_person | netspeak
  Millis message_gap{1500};
  std::optional<std::vector<int>> ranking;  // else a seeded permutation
  std::optional<int> emotion;               // else seeded in -5..5
  GuessPolicy guess_policy = GuessPolicy::truthful_mirror;
  int guess_constant = 0;
  /// Weight of the bot's own preference in its private allocation; 0 copies
  /// the team allocation exactly.
  double allocation_divergence = 0.5;
  bool skip_self_report = false;
  bool skip_guesses = false;
  bool skip_survey = false;
  bool send_done = true;  // in Decide only
  /// Post every `flood_interval` from team formation on, whatever the chat state.
  bool flood = false;
  Millis flood_interval{40};
  std::optional<DisconnectScript> disconnect;
  /// Send this many malformed frames early in Discuss; each must draw a
  /// VALIDATION error.
  int mutations = 0;
};

struct BotScript {
  std::uint64_t seed = 0;
  std::string pseudonym;
  Persona persona;
};

Persona persona_from_json(const nlohmann::json& j);

struct CohortSpec {
  std::uint64_t seed = 0;
  std::vector<BotScript> scripts;
  /// Experiment overrides in config-file form, applied by the in-process hub.
  nlohmann::json config = nlohmann::json::object();
};

/// {"bots": n, "seed"?: s, "defaults"?: persona, "overrides"?: [{"index", "persona"}],
///  "config"?: {...}}. A seed passed here wins over the file's.
CohortSpec cohort_from_json(const nlohmann::json& j, std::optional<std::uint64_t> seed = {});

struct Action {
  enum class Kind { http, ws_open, ws_send, ws_close };
  Kind kind = Kind::http;
  HttpRequest request;  // http
  std::string tag;      // http: what the response answers
  std::string token;    // ws_open
  std::string frame;    // ws_send
};

struct Captured {
  Timestamp at{};
  std::string text;
};

struct Summary {
  std::string pseudonym;
  ParticipantId participant_id;
  std::optional<TeamId> team_id;
  std::string final_status;  // complete, terminated, waiting, ...
  std::size_t frames = 0;
  std::size_t posts = 0;
  std::size_t expected_rejections = 0;
  std::vector<std::string> violations;
};

class Bot {
 public:
  Bot(BotScript script, std::size_t index);

  std::vector<Action> start(Timestamp now);
  std::vector<Action> on_http_response(const std::string& tag, const HttpResponse& response,
                                       Timestamp now);
  std::vector<Action> on_frame(const std::string& text, Timestamp now);
  std::vector<Action> on_time(Timestamp now);
  /// The transport lost the connection without the bot asking for it.
  void on_connection_lost(Timestamp now);

  std::optional<Timestamp> next_wakeup() const;
  bool finished() const noexcept { return finished_; }
  bool waiting_in_lobby() const noexcept { return status_ == "waiting"; }
  bool connected() const noexcept { return connected_; }

  const std::string& token() const noexcept { return token_; }
  const ParticipantId& participant_id() const noexcept { return participant_id_; }
  const std::vector<Captured>& captured() const noexcept { return captured_; }
  Summary summary() const;

 private:
  enum class Job {
    post,
    flood,
    ranking,
    allocation,
    done,
    self_report,
    guesses,
    ack,
    survey,
    disconnect,
    reconnect,
    mutate
  };
  struct Scheduled {
    Timestamp at;
    std::uint64_t order;
    Job job;
    std::string phase;  // job is dropped if the phase moved on
  };

  void schedule(Timestamp at, Job job);
  void enter_phase(const std::string& phase, const std::string& stage, Timestamp now);
  void absorb_team(const nlohmann::json& team);
  Action act(Job job, Timestamp now);
  std::optional<Action> perform(const Scheduled& s, Timestamp now);
  Action http(std::string method, std::string path, nlohmann::json body, std::string tag);
  Action ws(std::string_view type, nlohmann::json payload);
  void violation(std::string what);
  void check_frame(const nlohmann::json& frame);
  std::vector<Action> react(const nlohmann::json& frame, Timestamp now);
  std::string chat_line();
  std::vector<std::int64_t> preference_allocation(const std::vector<int>& ranking) const;
  bool chat_open() const;
  bool is_submitter() const;

  BotScript script_;
  std::size_t index_;
  std::mt19937_64 rng_;

  std::string token_;
  ParticipantId participant_id_;
  std::optional<TeamId> team_id_;
  std::vector<ParticipantId> members_;
  std::string status_ = "new";
  std::string phase_;
  std::string stage_;
  bool locked_ = false;
  bool connected_ = false;
  bool finished_ = false;
  bool disconnect_done_ = false;

  std::size_t proposals_ = 5;
  std::int64_t budget_ = 500000;
  nlohmann::json survey_;
  std::vector<int> ranking_;
  int emotion_ = 0;
  std::vector<ParticipantId> roster_;
  std::optional<std::vector<std::int64_t>> team_allocation_;

  std::vector<Scheduled> agenda_;
  std::uint64_t order_ = 0;
  std::optional<std::uint64_t> last_seq_;
  std::uint64_t last_message_id_ = 0;
  std::set<std::uint64_t> seen_messages_;

  std::vector<Captured> captured_;
  std::size_t posts_ = 0;
  std::size_t expected_rejections_ = 0;
  std::size_t pending_mutations_ = 0;
  std::size_t mutation_index_ = 0;
  std::vector<std::string> violations_;
};

/// Keys that must never reach a participant's socket: raw self-reports,
/// guesses, and per-member accuracy maps.
std::vector<std::string> privacy_violations(const nlohmann::json& frame);

}  // namespace teamspace::bots
