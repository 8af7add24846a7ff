#include "teamspace/bot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "teamspace/protocol.hpp"

namespace teamspace::bots {
namespace {

using nlohmann::json;

const std::vector<std::string>& corpus(const std::string& name) {
  static const std::vector<std::string> neutral{
      "I think the library proposal helps the most people.",
      "The shelter seems like the most urgent need to me.",
      "Tourism would bring money back into the town.",
      "Arts funding has a longer term payoff.",
      "The gallery feels like the weakest option.",
      "Maybe we should split the budget more evenly.",
      "I would put the shelter first and the gallery last.",
      "We have a good mix of opinions here.",
  };
  static const std::vector<std::string> second_person{
      "What do you think about the shelter?",
      "You make a good point, you really do.",
      "Could you explain why you ranked the arts first?",
      "Are you okay with giving tourism less?",
      "I agree with you on the library.",
      "Do you all want to finalize this now?",
  };
  static const std::vector<std::string> netspeak{
      "lol ok that works",     "brb thinking about it", "ok ok sounds good",
      "idk tbh, maybe library", "yeah lol same",         "omg the shelter for sure",
  };
  if (name == "second_person") return second_person;
  if (name == "netspeak") return netspeak;
  return neutral;
}

std::vector<std::int64_t> round_to_budget(const std::vector<double>& proportions,
                                          std::int64_t budget) {
  // Largest remainder: floor everything, then hand out the leftover units.
  std::vector<std::int64_t> out(proportions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::int64_t used = 0;
  for (std::size_t i = 0; i < proportions.size(); ++i) {
    const double exact = proportions[i] * static_cast<double>(budget);
    out[i] = static_cast<std::int64_t>(std::floor(exact));
    used += out[i];
    remainders.emplace_back(exact - static_cast<double>(out[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < budget; k = (k + 1) % remainders.size(), ++used) {
    ++out[remainders[k].second];
  }
  return out;
}

GuessPolicy guess_policy_from(const std::string& s) {
  if (s == "truthful-mirror" || s == "truthful_mirror") return GuessPolicy::truthful_mirror;
  if (s == "random") return GuessPolicy::random;
  if (s == "constant") return GuessPolicy::constant;
  throw std::invalid_argument("unknown guess policy " + s);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw std::invalid_argument(std::string("unknown ") + what + " key " + key);
    }
  }
}

void collect_privacy(const json& j, std::vector<std::string>& out, const std::string& path) {
  static const std::set<std::string> forbidden{"score",     "self_reports", "guesses",
                                               "guess_sets", "accuracies",  "accuracy",
                                               "total_abs_error"};
  if (j.is_object()) {
    for (const auto& [key, v] : j.items()) {
      const auto p = path + "." + key;
      if (forbidden.contains(key)) out.push_back(p);
      collect_privacy(v, out, p);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      collect_privacy(j[i], out, path + "[" + std::to_string(i) + "]");
    }
  }
}

Action close_action() {
  Action a;
  a.kind = Action::Kind::ws_close;
  return a;
}

}  // namespace

std::vector<std::string> privacy_violations(const json& frame) {
  std::vector<std::string> out;
  collect_privacy(frame, out, "");
  if (frame.value("type", "") == protocol::frame::exercise_feedback) {
    const auto payload = frame.value("payload", json::object());
    for (const auto& [key, _] : payload.items()) {
      static const std::set<std::string> allowed{"climate", "climate_display",
                                                 "own_accuracy_percent", "evaluated_targets",
                                                 "deadline"};
      if (!allowed.contains(key)) out.push_back(".payload." + key);
    }
  }
  return out;
}

Persona persona_from_json(const json& j) {
  check_keys(j,
             {"chattiness", "corpus", "message_gap_ms", "ranking", "emotion", "guess_policy",
              "guess_constant", "allocation_divergence", "skip_self_report", "skip_guesses",
              "skip_survey", "send_done", "flood", "flood_interval_ms", "disconnect", "mutations"},
             "persona");
  Persona p;
  p.chattiness = j.value("chattiness", p.chattiness);
  p.corpus = j.value("corpus", p.corpus);
  p.message_gap = Millis(j.value("message_gap_ms", p.message_gap.count()));
  if (j.contains("ranking")) p.ranking = j["ranking"].get<std::vector<int>>();
  if (j.contains("emotion")) p.emotion = j["emotion"].get<int>();
  if (j.contains("guess_policy")) p.guess_policy = guess_policy_from(j["guess_policy"]);
  p.guess_constant = j.value("guess_constant", p.guess_constant);
  p.allocation_divergence = j.value("allocation_divergence", p.allocation_divergence);
  p.skip_self_report = j.value("skip_self_report", false);
  p.skip_guesses = j.value("skip_guesses", false);
  p.skip_survey = j.value("skip_survey", false);
  p.send_done = j.value("send_done", true);
  p.flood = j.value("flood", false);
  p.flood_interval = Millis(j.value("flood_interval_ms", p.flood_interval.count()));
  p.mutations = j.value("mutations", 0);
  if (p.mutations < 0) throw std::invalid_argument("mutations must be non-negative");
  if (j.contains("disconnect")) {
    const auto& d = j["disconnect"];
    check_keys(d, {"phase", "after_ms", "reconnect_after_ms"}, "disconnect");
    DisconnectScript s;
    s.phase = phase_from_string(d.value("phase", "discuss"));
    s.after = Millis(d.value("after_ms", 1000));
    if (d.contains("reconnect_after_ms")) s.reconnect_after = Millis(d["reconnect_after_ms"].get<std::int64_t>());
    p.disconnect = s;
  }
  if (p.allocation_divergence < 0.0 || p.allocation_divergence > 1.0) {
    throw std::invalid_argument("allocation_divergence must lie in [0, 1]");
  }
  return p;
}

CohortSpec cohort_from_json(const json& j, std::optional<std::uint64_t> seed) {
  check_keys(j, {"bots", "seed", "defaults", "overrides", "config"}, "cohort");
  CohortSpec spec;
  spec.seed = seed.value_or(j.value("seed", std::uint64_t{0}));
  const auto n = j.at("bots").get<std::size_t>();
  const auto defaults = j.value("defaults", json::object());
  std::vector<json> personas(n, defaults);
  for (const auto& o : j.value("overrides", json::array())) {
    const auto index = o.at("index").get<std::size_t>();
    if (index >= n) throw std::invalid_argument("override index out of range");
    for (const auto& [k, v] : o.at("persona").items()) personas[index][k] = v;
  }
  std::mt19937_64 seeds(spec.seed);
  for (std::size_t i = 0; i < n; ++i) {
    BotScript s;
    s.seed = seeds();
    char name[40];
    std::snprintf(name, sizeof name, "Bot%02zu-%04llx", i + 1,
                  static_cast<unsigned long long>(spec.seed & 0xffff));
    s.pseudonym = name;
    s.persona = persona_from_json(personas[i]);
    spec.scripts.push_back(std::move(s));
  }
  spec.config = j.value("config", json::object());
  return spec;
}

Bot::Bot(BotScript script, std::size_t index)
    : script_(std::move(script)), index_(index), rng_(script_.seed) {
  if (script_.pseudonym.empty()) script_.pseudonym = "Bot" + std::to_string(index + 1);
}

void Bot::schedule(Timestamp at, Job job) {
  agenda_.push_back({at, order_++, job, phase_ + "/" + stage_});
}

std::optional<Timestamp> Bot::next_wakeup() const {
  if (agenda_.empty()) return std::nullopt;
  return std::min_element(agenda_.begin(), agenda_.end(),
                          [](const Scheduled& a, const Scheduled& b) { return a.at < b.at; })
      ->at;
}

Action Bot::http(std::string method, std::string path, json body, std::string tag) {
  Action a;
  a.kind = Action::Kind::http;
  a.request = {std::move(method), std::move(path), body.is_null() ? "" : body.dump()};
  a.tag = std::move(tag);
  return a;
}

Action Bot::ws(std::string_view type, json payload) {
  Action a;
  a.kind = Action::Kind::ws_send;
  a.frame = protocol::envelope(type, std::move(payload)).dump();
  return a;
}

void Bot::violation(std::string what) { violations_.push_back(std::move(what)); }

bool Bot::chat_open() const {
  if (locked_) return false;
  return phase_ == "discuss" || phase_ == "decide" || (phase_ == "interlude" && stage_.empty());
}

bool Bot::is_submitter() const {
  return !members_.empty() && members_.front() == participant_id_;
}

std::string Bot::chat_line() {
  const auto& lines = corpus(script_.persona.corpus);
  return lines[rng_() % lines.size()];
}

std::vector<std::int64_t> Bot::preference_allocation(const std::vector<int>& ranking) const {
  std::vector<double> w;
  double total = 0.0;
  for (int r : ranking) {
    w.push_back(static_cast<double>(ranking.size() + 1 - static_cast<std::size_t>(r)));
    total += w.back();
  }
  for (auto& x : w) x /= total;
  return round_to_budget(w, budget_);
}

std::vector<Action> Bot::start(Timestamp) {
  status_ = "joining";
  return {http("GET", "/api/config", nullptr, "config")};
}

std::vector<Action> Bot::on_http_response(const std::string& tag, const HttpResponse& r,
                                          Timestamp) {
  const bool ok = r.status >= 200 && r.status < 300;
  const auto body = json::parse(r.body, nullptr, false);
  if (!ok || body.is_discarded()) {
    violation("HTTP " + tag + " failed with " + std::to_string(r.status) + ": " + r.body);
    if (tag == "config" || tag == "session" || tag == "pseudonym" || tag == "lobby-survey") {
      finished_ = true;
      status_ = "join_failed";
    }
    return {};
  }
  const std::string base = "/api/session/" + token_;
  if (tag == "config") {
    proposals_ = body.at("proposals").size();
    budget_ = body.at("budget").get<std::int64_t>();
    survey_ = body.at("survey");
    if (script_.persona.ranking) {
      ranking_ = *script_.persona.ranking;
    } else {
      ranking_.resize(proposals_);
      std::iota(ranking_.begin(), ranking_.end(), 1);
      for (std::size_t i = ranking_.size(); i > 1; --i) std::swap(ranking_[i - 1], ranking_[rng_() % i]);
    }
    emotion_ = script_.persona.emotion.value_or(static_cast<int>(rng_() % 11) - 5);
    return {http("POST", "/api/session", json::object(), "session")};
  }
  if (tag == "session") {
    token_ = body.at("session_id").get<std::string>();
    participant_id_ = body.at("participant_id").get<std::string>();
    return {http("POST", "/api/session/" + token_ + "/pseudonym",
                 {{"pseudonym", script_.pseudonym}}, "pseudonym")};
  }
  if (tag == "pseudonym") {
    json demographics = json::object();
    for (const auto& item : survey_.value("demographics", json::array())) {
      demographics[item.at("id").get<std::string>()] = "option-" + std::to_string(rng_() % 4 + 1);
    }
    return {http("POST", base + "/lobby-survey",
                 {{"demographics", demographics}, {"ranking", ranking_}}, "lobby-survey")};
  }
  if (tag == "lobby-survey") {
    status_ = "waiting";
    connected_ = true;
    Action a;
    a.kind = Action::Kind::ws_open;
    a.token = token_;
    return {a};
  }
  if (tag == "survey-state") {
    const auto& team = body.at("team");
    if (team.is_null() || team.value("phase", "") != "exit_survey" ||
        team.value("exit_survey_submitted", false)) {
      return {};
    }
    json likert = json::object();
    for (const auto& scale : survey_.at("scales")) {
      for (const auto& item : scale.at("items")) {
        likert[item.at("id").get<std::string>()] = static_cast<int>(rng_() % 5) + 1;
      }
    }
    json binary = json::object();
    for (const auto& item : survey_.at("binary_items")) {
      binary[item.at("id").get<std::string>()] = (rng_() & 1) != 0;
    }
    json open = json::object();
    for (const auto& item : survey_.at("open_items")) {
      open[item.at("id").get<std::string>()] = chat_line();
    }
    const auto own = preference_allocation(ranking_);
    std::vector<double> mix(own.size());
    const double lambda = script_.persona.allocation_divergence;
    const auto& team_alloc = team.at("allocation");
    for (std::size_t i = 0; i < own.size(); ++i) {
      const double mine = static_cast<double>(own[i]) / static_cast<double>(budget_);
      const double theirs =
          team_alloc.is_null()
              ? mine
              : team_alloc.at("amounts")[i].get<double>() / static_cast<double>(budget_);
      mix[i] = (1.0 - lambda) * theirs + lambda * mine;
    }
    return {http("POST", base + "/exit-survey",
                 {{"likert", likert},
                  {"binary", binary},
                  {"open", open},
                  {"allocation", round_to_budget(mix, budget_)}},
                 "survey")};
  }
  return {};
}

void Bot::absorb_team(const json& team) {
  team_id_ = team.at("team_id").get<std::string>();
  members_.clear();
  for (const auto& m : team.at("members")) members_.push_back(m.at("participant_id").get<std::string>());
  locked_ = team.value("locked", false);
  status_ = "in_team";
}

void Bot::check_frame(const json& frame) {
  if (!frame.is_object() || !frame.contains("type") || !frame["type"].is_string()) {
    violation("malformed frame");
    return;
  }
  const auto type = frame["type"].get<std::string>();
  if (!protocol::is_server_frame_type(type)) violation("unknown frame type " + type);
  if (!frame.contains("payload") || !frame["payload"].is_object()) {
    violation(type + " frame without an object payload");
  }
  if (frame.contains("seq")) {
    const auto seq = frame["seq"].get<std::uint64_t>();
    if (last_seq_ && seq < *last_seq_) {
      violation(type + " frame seq " + std::to_string(seq) + " after " + std::to_string(*last_seq_));
    }
    last_seq_ = seq;
  }
  for (const auto& p : privacy_violations(frame)) violation("private field " + p + " in " + type);
}

std::vector<Action> Bot::on_frame(const std::string& text, Timestamp now) {
  captured_.push_back({now, text});
  auto frame = json::parse(text, nullptr, false);
  if (frame.is_discarded()) {
    violation("unparseable frame");
    return {};
  }
  check_frame(frame);
  if (!frame.contains("payload") || !frame["payload"].is_object()) return {};
  try {
    return react(frame, now);
  } catch (const json::exception& e) {
    violation("malformed " + frame.value("type", std::string("?")) + " frame: " + e.what());
    return {};
  }
}

std::vector<Action> Bot::react(const json& frame, Timestamp now) {
  const auto type = frame.value("type", "");
  const auto& p = frame["payload"];
  std::vector<Action> out;

  if (type == protocol::frame::state_snapshot) {
    if (p.contains("participant_id") && p["participant_id"] != participant_id_) {
      violation("snapshot for another participant");
    }
    const auto& team = p.value("team", json());
    if (team.is_object()) {
      const bool was_in_team = team_id_.has_value();
      absorb_team(team);
      for (const auto& m : team.at("transcript")) {
        const auto id = m.at("message_id").get<std::uint64_t>();
        seen_messages_.insert(id);
        last_message_id_ = std::max(last_message_id_, id);
      }
      if (!was_in_team && script_.persona.flood) schedule(now + script_.persona.flood_interval, Job::flood);
      const auto phase = team.at("phase").get<std::string>();
      const auto stage = team.value("stage", "");
      if (phase == "complete" || phase == "terminated") {
        finished_ = true;
        status_ = phase;
        out.push_back(close_action());
        connected_ = false;
        return out;
      }
      if (!team.value("active", true)) {
        // Came back too late to rejoin; nothing left to do.
        finished_ = true;
        status_ = "inactive";
        out.push_back(close_action());
        connected_ = false;
        return out;
      }
      enter_phase(phase, stage, now);
      const auto& ex = team.value("exercise", json());
      if (ex.is_object() && !ex.at("roster").is_null()) {
        roster_.clear();
        for (const auto& r : ex.at("roster")) roster_.push_back(r.at("participant_id").get<std::string>());
      }
    } else {
      status_ = p.value("status", status_);
    }
  } else if (type == protocol::frame::phase_change) {
    const auto phase = p.at("phase").get<std::string>();
    if (phase == "complete") {
      finished_ = true;
      status_ = "complete";
      connected_ = false;
      out.push_back(close_action());
      return out;
    }
    enter_phase(phase, p.value("stage", ""), now);
  } else if (type == protocol::frame::lock_state) {
    locked_ = p.at("locked").get<bool>();
  } else if (type == protocol::frame::message || type == protocol::frame::system) {
    const auto id = p.at("message_id").get<std::uint64_t>();
    if (!seen_messages_.contains(id)) {
      if (id != last_message_id_ + 1) {
        violation("message_id " + std::to_string(id) + " after " + std::to_string(last_message_id_));
      }
      seen_messages_.insert(id);
      last_message_id_ = std::max(last_message_id_, id);
    }
  } else if (type == protocol::frame::exercise_prompt) {
    const auto stage = p.at("stage").get<std::string>();
    stage_ = stage;
    if (stage == "self_report" && !script_.persona.skip_self_report) {
      schedule(now + Millis(200), Job::self_report);
    } else if (stage == "guessing") {
      roster_.clear();
      for (const auto& r : p.at("roster")) roster_.push_back(r.at("participant_id").get<std::string>());
      if (!script_.persona.skip_guesses) schedule(now + Millis(200), Job::guesses);
    }
  } else if (type == protocol::frame::exercise_feedback) {
    stage_ = "feedback";
    schedule(now + Millis(300), Job::ack);
  } else if (type == protocol::frame::team_terminated) {
    finished_ = true;
    status_ = "terminated";
    connected_ = false;
    out.push_back(close_action());
  } else if (type == protocol::frame::error) {
    const auto request = p.value("request", "");
    const auto code = p.value("code", "");
    const bool chat_race = request == protocol::frame::post_message &&
                           (code == "CHAT_LOCKED" || code == "PHASE_CLOSED");
    const bool stage_race = request == protocol::frame::exercise_submit && code == "PHASE_CLOSED";
    if (code == "VALIDATION" && pending_mutations_ > 0) {
      --pending_mutations_;
      ++expected_rejections_;
    } else if ((chat_race && (script_.persona.flood || !chat_open())) || stage_race ||
        (request == protocol::frame::done_signal && code == "PHASE_CLOSED")) {
      ++expected_rejections_;
    } else {
      violation("error " + code + " for " + request + ": " + p.value("message", ""));
    }
  }
  return out;
}

void Bot::enter_phase(const std::string& phase, const std::string& stage, Timestamp now) {
  if (phase == phase_ && stage == stage_) return;
  const bool new_phase = phase != phase_;
  phase_ = phase;
  stage_ = stage;
  if (!new_phase) return;
  const auto gap = script_.persona.message_gap;
  const int chatty = script_.persona.chattiness;
  if (phase == "discuss") {
    if (is_submitter()) schedule(now + gap / 2, Job::ranking);
    for (int k = 1; k <= chatty; ++k) schedule(now + gap * k, Job::post);
    for (int k = 1; k <= script_.persona.mutations; ++k) schedule(now + gap * k / 4, Job::mutate);
  } else if (phase == "interlude" && stage.empty()) {
    if (chatty > 0) schedule(now + gap, Job::post);
  } else if (phase == "decide") {
    if (is_submitter()) schedule(now + gap / 2, Job::allocation);
    for (int k = 1; k <= chatty; ++k) schedule(now + gap * k, Job::post);
    if (script_.persona.send_done) schedule(now + gap * (chatty + 1), Job::done);
  } else if (phase == "exit_survey") {
    if (!script_.persona.skip_survey) schedule(now + Millis(200), Job::survey);
  }
  const auto& d = script_.persona.disconnect;
  if (d && !disconnect_done_ && phase == to_string(d->phase)) schedule(now + d->after, Job::disconnect);
}

std::optional<Action> Bot::perform(const Scheduled& s, Timestamp now) {
  const bool phase_bound = s.job != Job::flood && s.job != Job::disconnect && s.job != Job::reconnect;
  if (finished_ && s.job != Job::reconnect) return std::nullopt;
  if (phase_bound) {
    const auto slash = s.phase.find('/');
    const bool stage_bound = s.job == Job::self_report || s.job == Job::guesses || s.job == Job::ack;
    if (stage_bound ? s.phase != phase_ + "/" + stage_ : s.phase.substr(0, slash) != phase_) {
      return std::nullopt;
    }
    if (!connected_) return std::nullopt;
  }
  const std::string base = "/api/session/" + token_;
  switch (s.job) {
    case Job::post:
      ++posts_;
      return ws(protocol::frame::post_message, {{"body", chat_line()}});
    case Job::flood:
      schedule(now + script_.persona.flood_interval, Job::flood);
      if (!connected_) return std::nullopt;
      ++posts_;
      return ws(protocol::frame::post_message, {{"body", chat_line()}});
    case Job::ranking:
      return http("POST", base + "/team-ranking", {{"ranking", ranking_}, {"agreed", true}},
                  "ranking");
    case Job::allocation:
      return http("POST", base + "/team-allocation",
                  {{"amounts", preference_allocation(ranking_)}}, "allocation");
    case Job::done:
      return ws(protocol::frame::done_signal, json::object());
    case Job::mutate: {
      static const std::vector<std::string> malformed{
          "{not json",
          R"({"type":"teleport","payload":{}})",
          R"({"type":"post_message","payload":"hello"})",
          R"({"payload":{"body":"no type"}})",
          R"({"type":42,"payload":{}})",
          R"([1,2,3])",
      };
      ++pending_mutations_;
      Action a;
      a.kind = Action::Kind::ws_send;
      a.frame = malformed[mutation_index_++ % malformed.size()];
      return a;
    }
    case Job::self_report:
      return ws(protocol::frame::exercise_submit,
                {{"stage", "self_report"}, {"payload", {{"score", emotion_}}}});
    case Job::guesses: {
      json guesses = json::object();
      for (const auto& target : roster_) {
        int g = emotion_;
        if (script_.persona.guess_policy == GuessPolicy::random) g = static_cast<int>(rng_() % 11) - 5;
        if (script_.persona.guess_policy == GuessPolicy::constant) g = script_.persona.guess_constant;
        guesses[target] = g;
      }
      return ws(protocol::frame::exercise_submit,
                {{"stage", "guessing"}, {"payload", {{"guesses", guesses}}}});
    }
    case Job::ack:
      return ws(protocol::frame::ack, {{"stage", "feedback"}});
    case Job::survey:
      return http("GET", base + "/state", nullptr, "survey-state");
    case Job::disconnect: {
      if (!connected_) return std::nullopt;
      disconnect_done_ = true;
      connected_ = false;
      if (script_.persona.disconnect->reconnect_after) {
        schedule(now + *script_.persona.disconnect->reconnect_after, Job::reconnect);
      } else {
        finished_ = true;
        status_ = "left";
      }
      return close_action();
    }
    case Job::reconnect: {
      if (connected_ || finished_) return std::nullopt;
      connected_ = true;
      Action a;
      a.kind = Action::Kind::ws_open;
      a.token = token_;
      return a;
    }
  }
  return std::nullopt;
}

std::vector<Action> Bot::on_time(Timestamp now) {
  std::vector<Action> out;
  while (true) {
    auto it = std::min_element(agenda_.begin(), agenda_.end(), [](const Scheduled& a, const Scheduled& b) {
      return a.at != b.at ? a.at < b.at : a.order < b.order;
    });
    if (it == agenda_.end() || it->at > now) break;
    const auto job = *it;
    agenda_.erase(it);
    if (auto a = perform(job, now)) out.push_back(std::move(*a));
  }
  return out;
}

void Bot::on_connection_lost(Timestamp) {
  if (connected_ && !finished_) violation("connection lost unexpectedly");
  connected_ = false;
}

Summary Bot::summary() const {
  Summary s;
  s.pseudonym = script_.pseudonym;
  s.participant_id = participant_id_;
  s.team_id = team_id_;
  s.final_status = status_;
  s.frames = captured_.size();
  s.posts = posts_;
  s.expected_rejections = expected_rejections_;
  s.violations = violations_;
  if (pending_mutations_ > 0) {
    s.violations.push_back(std::to_string(pending_mutations_) + " malformed frame(s) drew no error");
  }
  return s;
}

}  // namespace teamspace::bots
