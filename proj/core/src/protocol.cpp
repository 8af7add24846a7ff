#include "teamspace/protocol.hpp"

#include <algorithm>

#include "teamspace/intervention.hpp"

namespace teamspace::protocol {
namespace {

using nlohmann::json;

json timestamp_or_null(const std::optional<Timestamp>& t) {
  return t ? json(to_iso8601(*t)) : json(nullptr);
}

json remaining_seconds(const std::optional<Timestamp>& deadline, Timestamp now) {
  if (!deadline) return nullptr;
  const auto left = std::max<std::int64_t>(0, (*deadline - now).count());
  return (left + 999) / 1000;
}

std::string pseudonym_of(const SystemState& s, const ParticipantId& who) {
  const auto* p = s.find_participant(who);
  return p && p->pseudonym ? *p->pseudonym : who;
}

json roster_json(const SystemState& s, const std::vector<ParticipantId>& ids) {
  json out = json::array();
  for (const auto& id : ids) out.push_back({{"participant_id", id}, {"pseudonym", pseudonym_of(s, id)}});
  return out;
}

json chat_entry_json(const ChatEntry& m) {
  if (m.system) {
    return {{"message_id", m.message_id}, {"text", m.body}, {"sent_at", to_iso8601(m.sent_at)}};
  }
  return {{"message_id", m.message_id},
          {"sender", m.sender},
          {"body", m.body},
          {"sent_at", to_iso8601(m.sent_at)},
          {"phase", m.phase}};
}

json phase_payload(const TeamState& t, Timestamp now) {
  json p{{"team_id", t.id},
         {"phase", to_string(t.phase)},
         {"deadline", timestamp_or_null(t.deadline)},
         {"remaining_seconds", remaining_seconds(t.deadline, now)}};
  if (t.phase == Phase::interlude) {
    p["variant"] = to_string(t.condition);
    if (t.exercise) p["stage"] = to_string(t.exercise->stage);
  }
  return p;
}

json exercise_view(const SystemState& s, const TeamState& t, const ParticipantId& who) {
  if (!t.exercise) return nullptr;
  const auto& ex = *t.exercise;
  json v{{"stage", to_string(ex.stage)},
         {"deadline", to_iso8601(ex.stage_deadline)},
         {"self_report_submitted", ex.self_reports.contains(who)},
         {"guesses_submitted", ex.guess_sets.contains(who)},
         {"roster", nullptr},
         {"feedback", nullptr}};
  if (auto it = ex.pushed_rosters.find(who); it != ex.pushed_rosters.end()) {
    v["roster"] = roster_json(s, it->second);
  }
  if (ex.feedback) v["feedback"] = intervention::feedback_view(*ex.feedback, who);
  return v;
}

std::vector<std::pair<ParticipantId, json>> to_members(const TeamState& t, const json& frame) {
  std::vector<std::pair<ParticipantId, json>> out;
  for (const auto& m : t.members) out.emplace_back(m, frame);
  return out;
}

}  // namespace

bool is_server_frame_type(std::string_view type) noexcept {
  for (auto known : {frame::message, frame::system, frame::phase_change, frame::lock_state,
                     frame::exercise_prompt, frame::exercise_feedback, frame::team_terminated,
                     frame::state_snapshot, frame::error}) {
    if (type == known) return true;
  }
  return false;
}

json envelope(std::string_view type, json payload, std::optional<std::uint64_t> seq) {
  json f{{"type", type}, {"payload", std::move(payload)}};
  if (seq) f["seq"] = *seq;
  return f;
}

json error_payload(ErrorCode code, std::string_view message) {
  return {{"code", to_string(code)}, {"message", message}};
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::validation:
      return 400;
    case ErrorCode::not_found:
      return 404;
    case ErrorCode::halted:
      return 503;
    default:
      return 409;
  }
}

json public_config(const ExperimentConfig& c) {
  json proposals = json::array();
  for (const auto& p : c.proposals) {
    proposals.push_back({{"id", p.id}, {"title", p.title}, {"description", p.description}});
  }
  auto items = [](const std::vector<SurveyItem>& v) {
    json out = json::array();
    for (const auto& i : v) out.push_back({{"id", i.id}, {"text", i.text}});
    return out;
  };
  json scales = json::array();
  for (const auto& sc : c.survey.scales) scales.push_back({{"name", sc.name}, {"items", items(sc.items)}});
  return {{"team_size", c.team_size},
          {"budget", c.budget},
          {"proposals", std::move(proposals)},
          {"emotion_scale", {{"min", -5}, {"max", 5}}},
          {"durations_seconds",
           {{"discuss", c.discuss.count() / 1000.0},
            {"decide", c.decide.count() / 1000.0},
            {"pause", c.pause.count() / 1000.0},
            {"exercise_stage", c.exercise_stage.count() / 1000.0},
            {"feedback", c.feedback.count() / 1000.0},
            {"exit_survey", c.exit_survey_timeout.count() / 1000.0}}},
          {"survey",
           {{"likert_points", c.survey.likert_points},
            {"scales", std::move(scales)},
            {"binary_items", items(c.survey.binary_items)},
            {"open_items", items(c.survey.open_items)},
            {"demographics", items(c.survey.demographics)}}}};
}

json snapshot(const SystemState& s, const ParticipantId& who, const ExperimentConfig& config,
              Timestamp now) {
  const auto* p = s.find_participant(who);
  if (!p) throw CommandError(ErrorCode::not_found, "unknown session");
  json out{{"participant_id", who},
           {"pseudonym", p->pseudonym ? json(*p->pseudonym) : json(nullptr)},
           {"connected", p->connected},
           {"last_seq", s.last_seq},
           {"now", to_iso8601(now)},
           {"lobby_position", nullptr},
           {"team", nullptr}};
  auto it = std::find(s.lobby.begin(), s.lobby.end(), who);
  if (p->team_id) {
    out["status"] = "in_team";
  } else if (it != s.lobby.end()) {
    out["status"] = "waiting";
    out["lobby_position"] = (it - s.lobby.begin()) + 1;
  } else if (p->released) {
    out["status"] = "released";
  } else if (!p->pseudonym) {
    out["status"] = "needs_pseudonym";
  } else if (!p->lobby_ranking) {
    out["status"] = "needs_lobby_survey";
  } else {
    out["status"] = "disconnected";
  }
  if (!p->team_id) return out;

  const auto& t = s.teams.at(*p->team_id);
  json team = phase_payload(t, now);
  team["condition"] = to_string(t.condition);
  team["locked"] = t.locked;
  team["active"] = t.is_active(who);
  json members = json::array();
  for (const auto& m : t.members) {
    members.push_back(
        {{"participant_id", m}, {"pseudonym", pseudonym_of(s, m)}, {"active", t.is_active(m)}});
  }
  team["members"] = std::move(members);
  json transcript = json::array();
  for (const auto& m : t.transcript) {
    auto entry = chat_entry_json(m);
    entry["system"] = m.system;
    transcript.push_back(std::move(entry));
  }
  team["transcript"] = std::move(transcript);
  team["team_ranking"] = t.team_ranking ? json{{"ranking", t.team_ranking->ranking},
                                               {"agreed", t.team_ranking->agreed},
                                               {"submitter", pseudonym_of(s, t.team_ranking->submitter)}}
                                        : json(nullptr);
  team["allocation"] = t.allocation ? json{{"amounts", t.allocation->amounts},
                                           {"submitter", pseudonym_of(s, t.allocation->submitter)}}
                                    : json(nullptr);
  team["exercise"] = exercise_view(s, t, who);
  team["exit_survey_submitted"] = t.exit_surveys.contains(who);
  team["termination_reason"] = t.termination_reason ? json(*t.termination_reason) : json(nullptr);
  team["budget"] = config.budget;
  out["team"] = std::move(team);
  return out;
}

std::vector<std::pair<ParticipantId, json>> frames_for_event(const Event& e, const SystemState& s,
                                                             const ExperimentConfig& config) {
  std::vector<std::pair<ParticipantId, json>> out;
  if (!e.team_id) return out;
  const auto* tp = s.find_team(*e.team_id);
  if (!tp) return out;
  const auto& t = *tp;
  const auto& pl = e.payload;

  switch (e.kind) {
    case EventKind::team_formed:
      for (const auto& m : t.members) {
        out.emplace_back(m, envelope(frame::state_snapshot, snapshot(s, m, config, e.wall_time),
                                     e.seq));
      }
      break;
    case EventKind::phase_started: {
      auto payload = phase_payload(t, e.wall_time);
      payload["duration_ms"] = pl["duration_ms"];
      out = to_members(t, envelope(frame::phase_change, payload, e.seq));
      const auto stage = pl.value("stage", "");
      if (stage == "self_report") {
        for (const auto& m : t.members) {
          if (!t.is_active(m)) continue;
          out.emplace_back(m, envelope(frame::exercise_prompt,
                                       {{"stage", stage},
                                        {"deadline", timestamp_or_null(t.deadline)},
                                        {"scale", {{"min", -5}, {"max", 5}}}},
                                       e.seq));
        }
      } else if (stage == "guessing") {
        for (const auto& [m, roster] : t.exercise->pushed_rosters) {
          out.emplace_back(m, envelope(frame::exercise_prompt,
                                       {{"stage", stage},
                                        {"deadline", timestamp_or_null(t.deadline)},
                                        {"scale", {{"min", -5}, {"max", 5}}},
                                        {"roster", roster_json(s, roster)}},
                                       e.seq));
        }
      }
      break;
    }
    case EventKind::message_posted:
    case EventKind::system_announced: {
      const auto id = pl["message_id"].get<std::uint64_t>();
      auto it = std::find_if(t.transcript.rbegin(), t.transcript.rend(),
                             [&](const ChatEntry& m) { return m.message_id == id; });
      const bool system = e.kind == EventKind::system_announced;
      out = to_members(t, envelope(system ? frame::system : frame::message, chat_entry_json(*it),
                                   e.seq));
      break;
    }
    case EventKind::chat_locked:
    case EventKind::chat_unlocked: {
      const bool locked = e.kind == EventKind::chat_locked;
      out = to_members(t, envelope(frame::lock_state,
                                   {{"locked", locked}, {"reason", locked ? "intervention" : "none"}},
                                   e.seq));
      break;
    }
    case EventKind::feedback_computed:
      for (const auto& m : t.members) {
        if (!t.is_active(m)) continue;
        auto view = intervention::feedback_view(*t.exercise->feedback, m);
        view["deadline"] = timestamp_or_null(t.deadline);
        out.emplace_back(m, envelope(frame::exercise_feedback, std::move(view), e.seq));
      }
      break;
    case EventKind::team_terminated:
      out = to_members(t, envelope(frame::team_terminated,
                                   {{"reason", pl["reason"]}, {"active_count", pl["active_count"]}},
                                   e.seq));
      break;
    case EventKind::team_completed:
      out = to_members(t, envelope(frame::phase_change, phase_payload(t, e.wall_time), e.seq));
      break;
    default:
      break;
  }
  return out;
}

}  // namespace teamspace::protocol
