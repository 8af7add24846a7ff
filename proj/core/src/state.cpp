#include "teamspace/state.hpp"

#include <algorithm>
#include <array>

#include "teamspace/errors.hpp"
#include "teamspace/event_log.hpp"

namespace teamspace {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const Event& e, const std::string& msg) {
  throw ReplayError(e.seq, std::string(to_string(e.kind)) + ": " + msg);
}

ParticipantState& participant(SystemState& s, const Event& e) {
  auto it = s.participants.find(*e.session_id);
  if (it == s.participants.end()) fail(e, "unknown participant " + *e.session_id);
  return it->second;
}

TeamState& team(SystemState& s, const Event& e) {
  auto it = s.teams.find(*e.team_id);
  if (it == s.teams.end()) fail(e, "unknown team " + *e.team_id);
  return it->second;
}

ExerciseState& exercise(TeamState& t, const Event& e) {
  if (!t.exercise) fail(e, "team " + t.id + " has no exercise in progress");
  return *t.exercise;
}

void remove_from_lobby(SystemState& s, const ParticipantId& id) {
  std::erase(s.lobby, id);
  s.lobby_since.erase(id);
}

void enter_phase(TeamState& t, Phase p) {
  t.phase = p;
  if (t.history.empty() || t.history.back() != p) t.history.push_back(p);
}

std::vector<std::int64_t> int64_array(const json& j) { return j.get<std::vector<std::int64_t>>(); }

std::optional<AccuracyResult> accuracy_from_json(const ParticipantId& who, const json& j) {
  if (j.is_null()) return std::nullopt;
  AccuracyResult r;
  r.participant = who;
  r.accuracy = j.at("accuracy").get<double>();
  r.evaluated_targets = j.at("evaluated_targets").get<std::size_t>();
  r.total_abs_error = j.at("total_abs_error").get<int>();
  return r;
}

void append_chat(TeamState& t, const Event& e, ChatEntry entry) {
  if (entry.message_id != t.next_message_id) {
    fail(e, "message_id " + std::to_string(entry.message_id) + " breaks the team sequence (expected " +
                std::to_string(t.next_message_id) + ")");
  }
  t.next_message_id = entry.message_id + 1;
  t.transcript.push_back(std::move(entry));
}

}  // namespace

std::string_view to_string(Condition c) noexcept {
  return c == Condition::control ? "control" : "intervention";
}

std::string_view to_string(Phase p) noexcept {
  static constexpr std::array<std::string_view, 6> names = {
      "discuss", "interlude", "decide", "exit_survey", "terminated", "complete"};
  return names[static_cast<std::size_t>(p)];
}

std::string_view to_string(ExerciseStage s) noexcept {
  static constexpr std::array<std::string_view, 4> names = {"self_report", "guessing",
                                                            "feedback", "done"};
  return names[static_cast<std::size_t>(s)];
}

Condition condition_from_string(std::string_view s) {
  if (s == "control") return Condition::control;
  if (s == "intervention") return Condition::intervention;
  throw std::invalid_argument("unknown condition '" + std::string(s) + "'");
}

Phase phase_from_string(std::string_view s) {
  for (int i = 0; i < 6; ++i) {
    if (to_string(static_cast<Phase>(i)) == s) return static_cast<Phase>(i);
  }
  throw std::invalid_argument("unknown phase '" + std::string(s) + "'");
}

ExerciseStage stage_from_string(std::string_view s) {
  for (int i = 0; i < 4; ++i) {
    if (to_string(static_cast<ExerciseStage>(i)) == s) return static_cast<ExerciseStage>(i);
  }
  throw std::invalid_argument("unknown stage '" + std::string(s) + "'");
}

const ParticipantState* SystemState::find_participant(const ParticipantId& id) const {
  auto it = participants.find(id);
  return it == participants.end() ? nullptr : &it->second;
}

const TeamState* SystemState::find_team(const TeamId& id) const {
  auto it = teams.find(id);
  return it == teams.end() ? nullptr : &it->second;
}

const TeamState* SystemState::team_of(const ParticipantId& id) const {
  const auto* p = find_participant(id);
  if (!p || !p->team_id) return nullptr;
  return find_team(*p->team_id);
}

void apply(SystemState& s, const Event& e) {
  try {
    validate_event(e);
  } catch (const ValidationError& err) {
    fail(e, err.what());
  }
  const auto& pl = e.payload;
  switch (e.kind) {
    case EventKind::participant_joined: {
      const auto& id = *e.session_id;
      if (s.participants.contains(id)) fail(e, "duplicate participant " + id);
      ParticipantState p;
      p.id = id;
      p.joined_at = e.wall_time;
      s.participants.emplace(id, std::move(p));
      break;
    }
    case EventKind::pseudonym_set:
      participant(s, e).pseudonym = pl["pseudonym"].get<std::string>();
      break;
    case EventKind::lobby_survey_submitted: {
      auto& p = participant(s, e);
      p.lobby_ranking = pl["ranking"].get<std::vector<int>>();
      p.demographics = pl["demographics"];
      if (!p.team_id && std::find(s.lobby.begin(), s.lobby.end(), p.id) == s.lobby.end()) {
        s.lobby.push_back(p.id);
        s.lobby_since[p.id] = e.wall_time;
      }
      break;
    }
    case EventKind::team_formed: {
      const auto& id = *e.team_id;
      if (s.teams.contains(id)) fail(e, "duplicate team " + id);
      TeamState t;
      t.id = id;
      t.condition = condition_from_string(pl["condition"].get<std::string>());
      t.formed_at = e.wall_time;
      for (const auto& m : pl["members"]) {
        auto member = m.get<std::string>();
        auto pit = s.participants.find(member);
        if (pit == s.participants.end()) fail(e, "unknown member " + member);
        auto& p = pit->second;
        if (p.team_id) fail(e, member + " already belongs to team " + *p.team_id);
        p.team_id = id;
        remove_from_lobby(s, member);
        t.members.push_back(member);
        if (p.connected) t.active.insert(member);
      }
      s.teams.emplace(id, std::move(t));
      break;
    }
    case EventKind::phase_started: {
      auto& t = team(s, e);
      if (t.finished()) fail(e, "team " + t.id + " already finished");
      const auto phase = phase_from_string(pl["phase"].get<std::string>());
      const auto deadline = e.wall_time + Millis{pl["duration_ms"].get<std::int64_t>()};
      enter_phase(t, phase);
      t.deadline = deadline;
      if (phase == Phase::interlude && pl["variant"] == "intervention") {
        const auto stage = stage_from_string(pl["stage"].get<std::string>());
        if (stage == ExerciseStage::self_report) t.exercise.emplace();
        auto& ex = exercise(t, e);
        ex.stage = stage;
        ex.stage_deadline = deadline;
        if (stage == ExerciseStage::guessing) {
          ex.rosters.clear();
          for (const auto& [who, roster] : pl["rosters"].items()) {
            ex.rosters[who] = roster.get<std::vector<std::string>>();
          }
          ex.pushed_rosters = ex.rosters;
        }
      } else if (phase == Phase::decide && t.exercise) {
        t.exercise->stage = ExerciseStage::done;
      }
      break;
    }
    case EventKind::message_posted: {
      auto& t = team(s, e);
      ChatEntry m;
      m.message_id = pl["message_id"].get<std::uint64_t>();
      m.sender_id = *e.session_id;
      m.sender = pl["pseudonym"].get<std::string>();
      m.body = pl["body"].get<std::string>();
      m.sent_at = e.wall_time;
      m.phase = pl["phase"].get<std::string>();
      append_chat(t, e, std::move(m));
      break;
    }
    case EventKind::system_announced: {
      auto& t = team(s, e);
      ChatEntry m;
      m.message_id = pl["message_id"].get<std::uint64_t>();
      m.system = true;
      m.sender = "system";
      m.body = pl["text"].get<std::string>();
      m.sent_at = e.wall_time;
      m.phase = std::string(to_string(t.phase));
      append_chat(t, e, std::move(m));
      break;
    }
    case EventKind::chat_locked:
      team(s, e).locked = true;
      break;
    case EventKind::chat_unlocked:
      team(s, e).locked = false;
      break;
    case EventKind::self_report_submitted: {
      auto& ex = exercise(team(s, e), e);
      ex.self_reports[*e.session_id] = pl["score"].get<int>();
      break;
    }
    case EventKind::guesses_submitted: {
      auto& ex = exercise(team(s, e), e);
      auto& g = ex.guess_sets[*e.session_id];
      g.clear();
      for (const auto& [target, score] : pl["guesses"].items()) g[target] = score.get<int>();
      break;
    }
    case EventKind::feedback_computed: {
      auto& ex = exercise(team(s, e), e);
      FeedbackRecord f;
      if (!pl["climate"].is_null()) f.climate = pl["climate"].get<double>();
      for (const auto& [who, acc] : pl["accuracies"].items()) {
        f.accuracies[who] = accuracy_from_json(who, acc);
      }
      ex.feedback = std::move(f);
      break;
    }
    case EventKind::team_ranking_submitted:
      team(s, e).team_ranking =
          TeamRankingRecord{pl["ranking"].get<std::vector<int>>(), pl["agreed"].get<bool>(),
                            *e.session_id};
      break;
    case EventKind::team_allocation_submitted:
      team(s, e).allocation = TeamAllocationRecord{int64_array(pl["amounts"]), *e.session_id};
      break;
    case EventKind::exit_survey_submitted:
      team(s, e).exit_surveys[*e.session_id] = exit_survey_from_json(pl);
      break;
    case EventKind::participant_disconnected: {
      auto& p = participant(s, e);
      p.connected = false;
      remove_from_lobby(s, p.id);
      if (pl["reason"] == "lobby_timeout") p.released = true;
      if (p.team_id) {
        auto& t = s.teams.at(*p.team_id);
        if (!t.finished() && t.active.erase(p.id) > 0) {
          t.disconnected_in[p.id] = t.phase;
          // Contributions are withdrawn only before feedback is computed, so the
          // logged feedback stays re-derivable from the final state.
          if (t.exercise && (t.exercise->stage == ExerciseStage::self_report ||
                             t.exercise->stage == ExerciseStage::guessing)) {
            auto& ex = *t.exercise;
            ex.self_reports.erase(p.id);
            ex.guess_sets.erase(p.id);
            ex.rosters.erase(p.id);
            for (auto& [_, roster] : ex.rosters) std::erase(roster, p.id);
          }
        }
      }
      break;
    }
    case EventKind::participant_reconnected: {
      auto& p = participant(s, e);
      p.connected = true;
      if (!pl["restored"].get<bool>()) break;
      if (p.team_id) {
        auto& t = s.teams.at(*p.team_id);
        t.active.insert(p.id);
        t.disconnected_in.erase(p.id);
      } else if (p.lobby_ranking && !p.released &&
                 std::find(s.lobby.begin(), s.lobby.end(), p.id) == s.lobby.end()) {
        s.lobby.push_back(p.id);
        s.lobby_since[p.id] = e.wall_time;
      }
      break;
    }
    case EventKind::team_terminated: {
      auto& t = team(s, e);
      enter_phase(t, Phase::terminated);
      t.deadline.reset();
      t.locked = false;
      t.ended_at = e.wall_time;
      t.termination_reason = pl["reason"].get<std::string>();
      break;
    }
    case EventKind::team_completed: {
      auto& t = team(s, e);
      enter_phase(t, Phase::complete);
      t.deadline.reset();
      t.ended_at = e.wall_time;
      break;
    }
  }
  s.last_seq = e.seq;
}

SystemState replay(std::span<const Event> events) {
  validate_sequence(events);
  SystemState s;
  for (const auto& e : events) apply(s, e);
  return s;
}

json to_json(const ExitSurveyResponse& r) {
  return {{"likert", r.likert}, {"binary", r.binary}, {"open", r.open}, {"allocation", r.allocation}};
}

ExitSurveyResponse exit_survey_from_json(const json& j) {
  ExitSurveyResponse r;
  r.likert = j.at("likert").get<std::map<std::string, int>>();
  r.binary = j.at("binary").get<std::map<std::string, bool>>();
  r.open = j.at("open").get<std::map<std::string, std::string>>();
  r.allocation = j.at("allocation").get<std::vector<std::int64_t>>();
  return r;
}

json to_json(const std::optional<AccuracyResult>& r) {
  if (!r) return nullptr;
  return {{"accuracy", r->accuracy},
          {"evaluated_targets", r->evaluated_targets},
          {"total_abs_error", r->total_abs_error}};
}

json to_json(const SystemState& s) {
  json out;
  out["last_seq"] = s.last_seq;
  out["lobby"] = s.lobby;
  auto& lobby_since = out["lobby_since"] = json::object();
  for (const auto& [id, t] : s.lobby_since) lobby_since[id] = to_iso8601(t);

  auto& ps = out["participants"] = json::object();
  for (const auto& [id, p] : s.participants) {
    json j;
    j["joined_at"] = to_iso8601(p.joined_at);
    j["pseudonym"] = p.pseudonym ? json(*p.pseudonym) : json(nullptr);
    j["demographics"] = p.demographics;
    j["lobby_ranking"] = p.lobby_ranking ? json(*p.lobby_ranking) : json(nullptr);
    j["connected"] = p.connected;
    j["team_id"] = p.team_id ? json(*p.team_id) : json(nullptr);
    j["released"] = p.released;
    ps[id] = std::move(j);
  }

  auto& ts = out["teams"] = json::object();
  for (const auto& [id, t] : s.teams) {
    json j;
    j["condition"] = to_string(t.condition);
    j["formed_at"] = to_iso8601(t.formed_at);
    j["members"] = t.members;
    j["active"] = t.active;
    auto& dis = j["disconnected_in"] = json::object();
    for (const auto& [who, ph] : t.disconnected_in) dis[who] = to_string(ph);
    j["phase"] = to_string(t.phase);
    j["deadline"] = t.deadline ? json(to_iso8601(*t.deadline)) : json(nullptr);
    auto& hist = j["history"] = json::array();
    for (auto ph : t.history) hist.push_back(to_string(ph));
    j["locked"] = t.locked;
    j["next_message_id"] = t.next_message_id;
    auto& tr = j["transcript"] = json::array();
    for (const auto& m : t.transcript) {
      tr.push_back({{"message_id", m.message_id},
                    {"system", m.system},
                    {"sender_id", m.sender_id},
                    {"sender", m.sender},
                    {"body", m.body},
                    {"sent_at", to_iso8601(m.sent_at)},
                    {"phase", m.phase}});
    }
    if (t.exercise) {
      const auto& ex = *t.exercise;
      json x;
      x["stage"] = to_string(ex.stage);
      x["stage_deadline"] = to_iso8601(ex.stage_deadline);
      x["self_reports"] = ex.self_reports;
      x["guess_sets"] = ex.guess_sets;
      x["rosters"] = ex.rosters;
      x["pushed_rosters"] = ex.pushed_rosters;
      if (ex.feedback) {
        json f;
        f["climate"] = ex.feedback->climate ? json(*ex.feedback->climate) : json(nullptr);
        auto& acc = f["accuracies"] = json::object();
        for (const auto& [who, r] : ex.feedback->accuracies) acc[who] = to_json(r);
        x["feedback"] = std::move(f);
      } else {
        x["feedback"] = nullptr;
      }
      j["exercise"] = std::move(x);
    } else {
      j["exercise"] = nullptr;
    }
    j["team_ranking"] = t.team_ranking ? json{{"ranking", t.team_ranking->ranking},
                                              {"agreed", t.team_ranking->agreed},
                                              {"submitter", t.team_ranking->submitter}}
                                       : json(nullptr);
    j["allocation"] = t.allocation ? json{{"amounts", t.allocation->amounts},
                                          {"submitter", t.allocation->submitter}}
                                   : json(nullptr);
    auto& surveys = j["exit_surveys"] = json::object();
    for (const auto& [who, r] : t.exit_surveys) surveys[who] = to_json(r);
    j["ended_at"] = t.ended_at ? json(to_iso8601(*t.ended_at)) : json(nullptr);
    j["termination_reason"] = t.termination_reason ? json(*t.termination_reason) : json(nullptr);
    ts[id] = std::move(j);
  }
  return out;
}

}  // namespace teamspace
