#include "teamspace/event.hpp"

#include <array>
#include <set>
#include <stdexcept>

#include "teamspace/errors.hpp"

namespace teamspace {
namespace {

constexpr std::array<std::string_view, kEventKindCount> kKindNames = {
    "participant_joined",       "pseudonym_set",
    "lobby_survey_submitted",   "team_formed",
    "phase_started",            "message_posted",
    "system_announced",         "chat_locked",
    "chat_unlocked",            "self_report_submitted",
    "guesses_submitted",        "feedback_computed",
    "team_ranking_submitted",   "team_allocation_submitted",
    "exit_survey_submitted",    "participant_disconnected",
    "participant_reconnected",  "team_terminated",
    "team_completed",
};

using nlohmann::json;

[[noreturn]] void bad(const Event& e, const std::string& what) {
  throw ValidationError(std::string(to_string(e.kind)) + ": " + what);
}

void need(const Event& e, const char* key, json::value_t type) {
  if (!e.payload.contains(key)) bad(e, std::string("missing payload field ") + key);
  const auto& v = e.payload[key];
  const bool ok = type == json::value_t::number_integer
                      ? v.is_number_integer()
                      : (type == json::value_t::number_float ? v.is_number() : v.type() == type);
  if (!ok) bad(e, std::string("payload field ") + key + " has the wrong type");
}

void need_int_array(const Event& e, const char* key) {
  need(e, key, json::value_t::array);
  for (const auto& v : e.payload[key]) {
    if (!v.is_number_integer()) bad(e, std::string(key) + " must hold integers");
  }
}

void need_one_of(const Event& e, const char* key, std::initializer_list<std::string_view> allowed) {
  need(e, key, json::value_t::string);
  const auto v = e.payload[key].get<std::string>();
  for (auto a : allowed) {
    if (v == a) return;
  }
  bad(e, std::string("payload field ") + key + " has unexpected value '" + v + "'");
}

void need_team(const Event& e) {
  if (!e.team_id || e.team_id->empty()) bad(e, "team_id required");
}

void need_session(const Event& e) {
  if (!e.session_id || e.session_id->empty()) bad(e, "session_id required");
}

}  // namespace

std::string_view to_string(EventKind kind) noexcept {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<EventKind> event_kind_from_string(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

json to_json(const Event& e) {
  json j = {{"event_seq", e.seq},
            {"wall_time", to_iso8601(e.wall_time)},
            {"kind", to_string(e.kind)},
            {"payload", e.payload}};
  if (e.team_id) j["team_id"] = *e.team_id;
  if (e.session_id) j["session_id"] = *e.session_id;
  return j;
}

Event event_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("event is not a JSON object");
  for (const char* key : {"event_seq", "wall_time", "kind", "payload"}) {
    if (!j.contains(key)) throw std::invalid_argument(std::string("event missing ") + key);
  }
  Event e;
  if (!j["event_seq"].is_number_unsigned()) throw std::invalid_argument("bad event_seq");
  e.seq = j["event_seq"].get<std::uint64_t>();
  e.wall_time = parse_iso8601(j["wall_time"].get<std::string>());
  const auto kind_name = j["kind"].get<std::string>();
  auto kind = event_kind_from_string(kind_name);
  if (!kind) throw std::invalid_argument("unknown event kind '" + kind_name + "'");
  e.kind = *kind;
  e.payload = j["payload"];
  if (j.contains("team_id")) e.team_id = j["team_id"].get<std::string>();
  if (j.contains("session_id")) e.session_id = j["session_id"].get<std::string>();
  return e;
}

std::string serialize_event(const Event& event) { return to_json(event).dump(); }

void validate_event(const Event& e) {
  using vt = json::value_t;
  if (!e.payload.is_object()) bad(e, "payload must be an object");
  switch (e.kind) {
    case EventKind::participant_joined:
      need_session(e);
      break;
    case EventKind::pseudonym_set:
      need_session(e);
      need(e, "pseudonym", vt::string);
      break;
    case EventKind::lobby_survey_submitted:
      need_session(e);
      need_int_array(e, "ranking");
      need(e, "demographics", vt::object);
      break;
    case EventKind::team_formed:
      need_team(e);
      need_one_of(e, "condition", {"control", "intervention"});
      need(e, "members", vt::array);
      for (const auto& m : e.payload["members"]) {
        if (!m.is_string()) bad(e, "members must be participant ids");
      }
      break;
    case EventKind::phase_started: {
      need_team(e);
      need_one_of(e, "phase", {"discuss", "interlude", "decide", "exit_survey"});
      need(e, "duration_ms", vt::number_integer);
      if (e.payload["phase"] == "interlude") {
        need_one_of(e, "variant", {"control", "intervention"});
        if (e.payload["variant"] == "intervention") {
          need_one_of(e, "stage", {"self_report", "guessing", "feedback"});
          if (e.payload["stage"] == "guessing") need(e, "rosters", vt::object);
        }
      }
      break;
    }
    case EventKind::message_posted:
      need_team(e);
      need_session(e);
      need(e, "message_id", vt::number_integer);
      need(e, "pseudonym", vt::string);
      need(e, "body", vt::string);
      need_one_of(e, "phase", {"discuss", "decide", "interlude-control"});
      break;
    case EventKind::system_announced:
      need_team(e);
      need(e, "message_id", vt::number_integer);
      need(e, "text", vt::string);
      break;
    case EventKind::chat_locked:
    case EventKind::chat_unlocked:
    case EventKind::team_completed:
      need_team(e);
      break;
    case EventKind::self_report_submitted:
      need_team(e);
      need_session(e);
      need(e, "score", vt::number_integer);
      break;
    case EventKind::guesses_submitted:
      need_team(e);
      need_session(e);
      need(e, "guesses", vt::object);
      for (const auto& [_, v] : e.payload["guesses"].items()) {
        if (!v.is_number_integer()) bad(e, "guesses must be integers");
      }
      break;
    case EventKind::feedback_computed:
      need_team(e);
      if (!e.payload.contains("climate") ||
          !(e.payload["climate"].is_null() || e.payload["climate"].is_number())) {
        bad(e, "climate must be a number or null");
      }
      need(e, "accuracies", vt::object);
      break;
    case EventKind::team_ranking_submitted:
      need_team(e);
      need_session(e);
      need_int_array(e, "ranking");
      need(e, "agreed", vt::boolean);
      break;
    case EventKind::team_allocation_submitted:
      need_team(e);
      need_session(e);
      need_int_array(e, "amounts");
      break;
    case EventKind::exit_survey_submitted:
      need_team(e);
      need_session(e);
      need(e, "likert", vt::object);
      need(e, "binary", vt::object);
      need(e, "open", vt::object);
      need_int_array(e, "allocation");
      break;
    case EventKind::participant_disconnected:
      need_session(e);
      need(e, "reason", vt::string);
      break;
    case EventKind::participant_reconnected:
      need_session(e);
      need(e, "restored", vt::boolean);
      break;
    case EventKind::team_terminated:
      need_team(e);
      need(e, "reason", vt::string);
      need(e, "active_count", vt::number_integer);
      break;
  }
}

}  // namespace teamspace
