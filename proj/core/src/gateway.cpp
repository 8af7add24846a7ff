#include "teamspace/gateway.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "teamspace/protocol.hpp"

namespace teamspace {
namespace {

using nlohmann::json;

std::string hex128(std::uint64_t a, std::uint64_t b) {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(a),
                static_cast<unsigned long long>(b));
  return buf;
}

HttpResponse json_response(int status, const json& body) {
  HttpResponse r;
  r.status = status;
  r.body = body.dump();
  return r;
}

HttpResponse error_response(ErrorCode code, std::string_view message) {
  return json_response(protocol::http_status(code),
                       {{"error", protocol::error_payload(code, message)}});
}

struct Target {
  std::vector<std::string> segments;
  std::map<std::string, std::string> query;
};

Target parse_target(std::string_view target) {
  Target t;
  auto q = target.find('?');
  auto path = target.substr(0, q);
  std::size_t start = 1;
  while (start <= path.size()) {
    auto end = path.find('/', start);
    if (end == std::string_view::npos) end = path.size();
    if (end > start) t.segments.emplace_back(path.substr(start, end - start));
    start = end + 1;
  }
  if (q != std::string_view::npos) {
    std::string_view rest = target.substr(q + 1);
    while (!rest.empty()) {
      auto amp = rest.find('&');
      auto pair = rest.substr(0, amp);
      auto eq = pair.find('=');
      if (eq != std::string_view::npos) {
        t.query.emplace(std::string(pair.substr(0, eq)), std::string(pair.substr(eq + 1)));
      } else {
        t.query.emplace(std::string(pair), "");
      }
      if (amp == std::string_view::npos) break;
      rest.remove_prefix(amp + 1);
    }
  }
  return t;
}

std::int64_t query_int(const Target& t, const std::string& key, std::int64_t fallback) {
  auto it = t.query.find(key);
  if (it == t.query.end()) return fallback;
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc() || p != it->second.data() + it->second.size()) {
    throw ValidationError("query parameter " + key + " must be an integer");
  }
  return v;
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("body must be a JSON object");
  return j;
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field ") + key);
  return *it;
}

ExitSurveyResponse survey_from_body(const json& j) {
  ExitSurveyResponse r;
  r.likert = field(j, "likert").get<std::map<std::string, int>>();
  r.binary = j.value("binary", json::object()).get<std::map<std::string, bool>>();
  r.open = j.value("open", json::object()).get<std::map<std::string, std::string>>();
  r.allocation = field(j, "allocation").get<std::vector<std::int64_t>>();
  return r;
}

std::string content_type_for(const std::filesystem::path& p) {
  static const std::map<std::string, std::string> types{
      {".html", "text/html; charset=utf-8"}, {".js", "text/javascript"},
      {".css", "text/css"},                  {".json", "application/json"},
      {".svg", "image/svg+xml"},             {".png", "image/png"},
      {".ico", "image/x-icon"},              {".map", "application/json"}};
  auto it = types.find(p.extension().string());
  return it == types.end() ? "application/octet-stream" : it->second;
}

}  // namespace

TokenSource random_tokens() {
  return [] {
    static thread_local std::random_device rd;
    auto word = [] {
      return (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
    };
    return hex128(word(), word());
  };
}

TokenSource seeded_tokens(std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed ^ 0x746f6b656e73ULL);
  return [rng] {
    auto a = (*rng)();
    auto b = (*rng)();
    return hex128(a, b);
  };
}

Gateway::Gateway(ExperimentConfig config, EventSink& sink, TokenSource tokens,
                 std::filesystem::path static_dir)
    : config_(config),
      tokens_(std::move(tokens)),
      static_dir_(std::move(static_dir)),
      experiment_(std::move(config), sink, this) {}

Gateway::Gateway(ExperimentConfig config, EventSink& sink, TokenSource tokens,
                 std::span<const Event> history, std::filesystem::path static_dir)
    : config_(config),
      tokens_(std::move(tokens)),
      static_dir_(std::move(static_dir)),
      experiment_(Experiment::resume(std::move(config), sink, history, this)) {}

void Gateway::set_frame_sink(FrameSink sink) {
  std::lock_guard lock(mutex_);
  frame_sink_ = std::move(sink);
}

void Gateway::set_close_sink(CloseSink sink) {
  std::lock_guard lock(mutex_);
  close_sink_ = std::move(sink);
}

bool Gateway::halted() const {
  std::lock_guard lock(mutex_);
  return halted_;
}

SystemState Gateway::state_copy() const {
  std::lock_guard lock(mutex_);
  return experiment_.state();
}

void Gateway::on_event(const Event& event, const SystemState& state) {
  for (const auto& [who, frame] : protocol::frames_for_event(event, state, config_)) {
    if (auto it = live_.find(who); it != live_.end()) send(it->second, frame);
  }
}

void Gateway::send(ConnectionId conn, const json& frame) {
  if (frame_sink_) frame_sink_(conn, frame.dump());
}

void Gateway::send_error(ConnectionId conn, ErrorCode code, std::string_view message,
                         std::string_view request) {
  auto payload = protocol::error_payload(code, message);
  payload["request"] = request;
  send(conn, protocol::envelope(protocol::frame::error, std::move(payload)));
}

const ParticipantId& Gateway::session(std::string_view token) const {
  auto it = sessions_.find(token);
  if (it == sessions_.end()) throw CommandError(ErrorCode::not_found, "unknown session");
  return it->second;
}

HttpResponse Gateway::handle_http(const HttpRequest& request, Timestamp now) {
  std::lock_guard lock(mutex_);
  try {
    if (halted_ && request.method != "GET") {
      return error_response(ErrorCode::halted, "the event log failed; the run has halted");
    }
    return route(request, now);
  } catch (const CommandError& e) {
    return error_response(e.code(), e.what());
  } catch (const json::exception& e) {
    return error_response(ErrorCode::validation, e.what());
  } catch (const PersistenceError& e) {
    halted_ = true;
    return error_response(ErrorCode::halted, e.what());
  }
}

HttpResponse Gateway::route(const HttpRequest& req, Timestamp now) {
  const auto target = parse_target(req.target);
  const auto& seg = target.segments;
  const bool get = req.method == "GET";
  const bool post = req.method == "POST";

  if (seg.empty() || seg[0] != "api") {
    if (!get) return error_response(ErrorCode::not_found, "no such route");
    return serve_static(req.target.substr(0, req.target.find('?')));
  }
  if (seg.size() == 2 && seg[1] == "config" && get) {
    return json_response(200, protocol::public_config(config_));
  }
  if (seg.size() == 2 && seg[1] == "status" && get) {
    const auto& s = experiment_.state();
    json teams = json::object();
    for (const auto& [id, t] : s.teams) {
      teams[id] = {{"condition", to_string(t.condition)},
                   {"phase", to_string(t.phase)},
                   {"active", t.active.size()},
                   {"members", t.members.size()}};
    }
    std::size_t connected = 0;
    for (const auto& [_, p] : s.participants) connected += p.connected ? 1 : 0;
    return json_response(200, {{"last_seq", s.last_seq},
                               {"participants", s.participants.size()},
                               {"connected", connected},
                               {"lobby", s.lobby.size()},
                               {"teams", std::move(teams)},
                               {"halted", halted_}});
  }
  if (seg.size() == 2 && seg[1] == "session" && post) {
    auto token = tokens_();
    while (sessions_.contains(token)) token = tokens_();
    auto id = experiment_.join(now);
    sessions_.emplace(token, id);
    return json_response(201, {{"session_id", token}, {"participant_id", id}});
  }
  if (seg.size() < 3 || seg[1] != "session") {
    return error_response(ErrorCode::not_found, "no such route");
  }

  const auto& who = session(seg[2]);
  if (seg.size() == 4 && seg[3] == "state" && get) {
    const auto since = query_int(target, "since", -1);
    const auto wait = std::clamp<std::int64_t>(query_int(target, "wait", 0), 0, 30);
    auto r = json_response(200, protocol::snapshot(experiment_.state(), who, config_, now));
    if (since >= 0 && experiment_.state().last_seq <= static_cast<std::uint64_t>(since) && wait > 0) {
      r.poll_until = now + std::chrono::seconds(wait);
    }
    return r;
  }
  if (!post || seg.size() != 4) return error_response(ErrorCode::not_found, "no such route");

  const auto body = parse_body(req.body);
  const auto& action = seg[3];
  if (action == "pseudonym") {
    experiment_.set_pseudonym(who, field(body, "pseudonym").get<std::string>(), now);
    return json_response(200, {{"pseudonym", *experiment_.state().participants.at(who).pseudonym}});
  }
  if (action == "lobby-survey") {
    const auto position = experiment_.submit_lobby_survey(
        who, body.value("demographics", json::object()),
        field(body, "ranking").get<std::vector<int>>(), now);
    const auto* p = experiment_.state().find_participant(who);
    return json_response(200, {{"lobby_position", position},
                               {"team_id", p->team_id ? json(*p->team_id) : json(nullptr)}});
  }
  if (action == "team-ranking") {
    experiment_.submit_team_ranking(who, field(body, "ranking").get<std::vector<int>>(),
                                    body.value("agreed", false), now);
    return json_response(200, {{"accepted", true}});
  }
  if (action == "team-allocation") {
    experiment_.submit_team_allocation(
        who, field(body, "amounts").get<std::vector<std::int64_t>>(), now);
    return json_response(200, {{"accepted", true}});
  }
  if (action == "exit-survey") {
    experiment_.submit_exit_survey(who, survey_from_body(body), now);
    return json_response(200, {{"accepted", true}});
  }
  return error_response(ErrorCode::not_found, "no such route");
}

HttpResponse Gateway::serve_static(std::string_view path) const {
  if (static_dir_.empty()) return error_response(ErrorCode::not_found, "no static assets configured");
  std::string rel(path);
  if (rel.empty() || rel == "/") rel = "/index.html";
  if (rel.find("..") != std::string::npos || rel.find('%') != std::string::npos) {
    return error_response(ErrorCode::not_found, "no such file");
  }
  const auto file = static_dir_ / rel.substr(1);
  std::ifstream in(file, std::ios::binary);
  if (!in || std::filesystem::is_directory(file)) {
    return error_response(ErrorCode::not_found, "no such file");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  HttpResponse r;
  r.content_type = content_type_for(file);
  r.body = ss.str();
  return r;
}

bool Gateway::on_ws_open(ConnectionId conn, std::string_view token, Timestamp now) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(token);
  if (it == sessions_.end()) {
    send_error(conn, ErrorCode::not_found, "unknown session", "open");
    return false;
  }
  const auto who = it->second;
  if (auto old = live_.find(who); old != live_.end() && old->second != conn) {
    connections_.erase(old->second);
    if (close_sink_) close_sink_(old->second);
  }
  connections_[conn] = who;
  live_[who] = conn;
  try {
    if (!experiment_.state().participants.at(who).connected && !halted_) {
      experiment_.reconnect(who, now);
    }
  } catch (const PersistenceError&) {
    halted_ = true;
  }
  send(conn, protocol::envelope(protocol::frame::state_snapshot,
                                protocol::snapshot(experiment_.state(), who, config_, now),
                                experiment_.state().last_seq));
  return true;
}

void Gateway::on_ws_close(ConnectionId conn, Timestamp now) {
  std::lock_guard lock(mutex_);
  auto it = connections_.find(conn);
  if (it == connections_.end()) return;
  const auto who = it->second;
  connections_.erase(it);
  if (auto l = live_.find(who); l != live_.end() && l->second == conn) live_.erase(l);
  if (halted_) return;
  try {
    experiment_.disconnect(who, now);
  } catch (const PersistenceError&) {
    halted_ = true;
  }
}

void Gateway::on_ws_frame(ConnectionId conn, std::string_view text, Timestamp now) {
  std::lock_guard lock(mutex_);
  auto it = connections_.find(conn);
  if (it == connections_.end()) return;
  const auto who = it->second;
  auto frame = json::parse(text, nullptr, false);
  std::string type = "unknown";
  try {
    if (frame.is_discarded() || !frame.is_object()) {
      throw ValidationError("frame must be a JSON object");
    }
    if (auto t = frame.find("type"); t != frame.end() && t->is_string()) type = t->get<std::string>();
    if (halted_) throw CommandError(ErrorCode::halted, "the event log failed; the run has halted");
    dispatch_frame(who, frame, now);
  } catch (const CommandError& e) {
    send_error(conn, e.code(), e.what(), type);
  } catch (const json::exception& e) {
    send_error(conn, ErrorCode::validation, e.what(), type);
  } catch (const PersistenceError& e) {
    halted_ = true;
    send_error(conn, ErrorCode::halted, e.what(), type);
  }
}

void Gateway::dispatch_frame(const ParticipantId& who, const json& frame, Timestamp now) {
  const auto& type = field(frame, "type");
  if (!type.is_string()) throw ValidationError("frame type must be a string");
  const auto payload = frame.value("payload", json::object());
  if (!payload.is_object()) throw ValidationError("payload must be an object");
  const auto t = type.get<std::string>();

  if (t == protocol::frame::post_message) {
    experiment_.post_message(who, field(payload, "body").get<std::string>(), now);
  } else if (t == protocol::frame::done_signal) {
    experiment_.signal_done(who, now);
  } else if (t == protocol::frame::exercise_submit) {
    const auto stage = field(payload, "stage").get<std::string>();
    const auto& data = field(payload, "payload");
    if (stage == "self_report") {
      experiment_.submit_self_report(who, field(data, "score").get<int>(), now);
    } else if (stage == "guessing") {
      experiment_.submit_guesses(who, field(data, "guesses").get<std::map<ParticipantId, int>>(),
                                 now);
    } else {
      throw ValidationError("unknown exercise stage " + stage);
    }
  } else if (t == protocol::frame::ack) {
    // Delivery acks need no reply; only the feedback acknowledgement has an effect.
    if (payload.value("stage", "") == "feedback") experiment_.acknowledge_feedback(who, now);
  } else {
    throw ValidationError("unknown frame type " + t);
  }
}

std::size_t Gateway::tick(Timestamp now) {
  std::lock_guard lock(mutex_);
  if (halted_) return 0;
  try {
    return experiment_.tick(now);
  } catch (const PersistenceError&) {
    halted_ = true;
    throw;
  }
}

}  // namespace teamspace
