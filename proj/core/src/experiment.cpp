#include "teamspace/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "teamspace/chatroom.hpp"
#include "teamspace/errors.hpp"
#include "teamspace/intervention.hpp"

namespace teamspace {
namespace {

using nlohmann::json;

std::string padded_id(char prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, n);
  return buf;
}

Condition draw_condition(std::mt19937_64& rng) {
  return (rng() >> 63) != 0 ? Condition::intervention : Condition::control;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower_ascii(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::vector<Condition> condition_sequence(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<Condition> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw_condition(rng));
  return out;
}

Experiment::Experiment(ExperimentConfig config, EventSink& sink, EventListener* listener)
    : config_(std::move(config)), sink_(sink), listener_(listener), condition_rng_(config_.seed) {
  config_.validate();
}

Experiment Experiment::resume(ExperimentConfig config, EventSink& sink,
                              std::span<const Event> history, EventListener* listener) {
  Experiment ex(std::move(config), sink, listener);
  ex.state_ = replay(history);
  for (std::size_t i = 0; i < ex.state_.teams.size(); ++i) draw_condition(ex.condition_rng_);
  return ex;
}

void Experiment::emit(Timestamp now, EventKind kind, std::optional<TeamId> team,
                      std::optional<ParticipantId> who, json payload) {
  Event e;
  e.seq = state_.last_seq + 1;
  e.wall_time = now;
  e.team_id = std::move(team);
  e.session_id = std::move(who);
  e.kind = kind;
  e.payload = std::move(payload);
  validate_event(e);
  sink_.append(e);  // write-ahead: nothing is applied or broadcast before this returns
  apply(state_, e);
  if (kind == EventKind::phase_started || kind == EventKind::team_terminated ||
      kind == EventKind::team_completed) {
    done_.erase(*e.team_id);
    acks_.erase(*e.team_id);
  }
  if (listener_) listener_->on_event(e, state_);
}

const ParticipantState& Experiment::participant(const ParticipantId& who) const {
  const auto* p = state_.find_participant(who);
  if (!p) throw CommandError(ErrorCode::not_found, "unknown session " + who);
  return *p;
}

const TeamState& Experiment::active_team_of(const ParticipantId& who) const {
  const auto& p = participant(who);
  if (!p.team_id) throw CommandError(ErrorCode::precondition, who + " is not on a team");
  const auto& t = team(*p.team_id);
  if (!t.is_active(who)) {
    throw CommandError(ErrorCode::not_accepting, who + " is not an active member of " + t.id);
  }
  return t;
}

std::string Experiment::clock_text(Millis d) const {
  const auto total = (d.count() + 999) / 1000;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld:%02lld", static_cast<long long>(total / 60),
                static_cast<long long>(total % 60));
  return buf;
}

ParticipantId Experiment::join(Timestamp now) {
  auto id = padded_id('p', state_.participants.size() + 1, 4);
  emit(now, EventKind::participant_joined, std::nullopt, id, json::object());
  return id;
}

void Experiment::set_pseudonym(const ParticipantId& who, const std::string& pseudonym,
                               Timestamp now) {
  const auto& p = participant(who);
  if (p.team_id) throw CommandError(ErrorCode::not_accepting, "pseudonym is fixed once on a team");
  const auto name = trim(pseudonym);
  const auto length = chat::utf8_length(name);
  if (length == 0 || length > 24) {
    throw ValidationError("pseudonym must have 1-24 visible characters");
  }
  for (unsigned char c : name) {
    if (c < 0x20 || c == 0x7f) throw ValidationError("pseudonym contains control characters");
  }
  const auto key = lower_ascii(name);
  if (key == "system") throw ValidationError("pseudonym is reserved");
  for (const auto& [id, other] : state_.participants) {
    if (id != who && other.pseudonym && lower_ascii(*other.pseudonym) == key) {
      throw CommandError(ErrorCode::duplicate, "pseudonym already taken");
    }
  }
  emit(now, EventKind::pseudonym_set, std::nullopt, who, {{"pseudonym", name}});
}

std::size_t Experiment::submit_lobby_survey(const ParticipantId& who, const json& demographics,
                                            const std::vector<int>& ranking, Timestamp now) {
  const auto& p = participant(who);
  if (!p.pseudonym) throw CommandError(ErrorCode::precondition, "set a pseudonym first");
  if (p.team_id) throw CommandError(ErrorCode::not_accepting, who + " is already on a team");
  if (!p.connected) throw CommandError(ErrorCode::precondition, who + " is disconnected");
  RankVector rv(ranking);
  if (rv.size() != config_.proposal_count()) {
    throw ValidationError("ranking covers " + std::to_string(rv.size()) + " proposals, expected " +
                          std::to_string(config_.proposal_count()));
  }
  if (!demographics.is_object()) throw ValidationError("demographics must be an object");
  emit(now, EventKind::lobby_survey_submitted, std::nullopt, who,
       {{"ranking", ranking}, {"demographics", demographics}});
  auto it = std::find(state_.lobby.begin(), state_.lobby.end(), who);
  const auto position = static_cast<std::size_t>(it - state_.lobby.begin()) + 1;
  form_teams(now);
  return position;
}

std::vector<TeamId> Experiment::form_teams(Timestamp now) {
  std::vector<TeamId> formed;
  const auto size = static_cast<std::size_t>(config_.team_size);
  while (state_.lobby.size() >= size) {
    std::vector<ParticipantId> members(state_.lobby.begin(), state_.lobby.begin() + size);
    auto id = padded_id('t', state_.teams.size() + 1, 3);
    const auto condition = draw_condition(condition_rng_);
    emit(now, EventKind::team_formed, id, std::nullopt,
         {{"condition", to_string(condition)}, {"members", members}});
    start_phase(id, Phase::discuss, config_.discuss, now);
    announce(id,
             "Discuss phase: " + clock_text(config_.discuss) +
                 " remaining. Weigh the pros and cons of each proposal and submit your team's "
                 "ranking.",
             now);
    formed.push_back(std::move(id));
  }
  return formed;
}

std::size_t Experiment::tick(Timestamp now) {
  const auto before = state_.last_seq;
  std::vector<ParticipantId> expired;
  for (const auto& [who, since] : state_.lobby_since) {
    if (since + config_.lobby_timeout <= now) expired.push_back(who);
  }
  for (const auto& who : expired) {
    emit(now, EventKind::participant_disconnected, std::nullopt, who,
         {{"reason", "lobby_timeout"}});
  }
  form_teams(now);

  std::vector<TeamId> due;
  for (const auto& [id, t] : state_.teams) {
    if (!t.finished() && t.deadline && *t.deadline <= now) due.push_back(id);
  }
  for (const auto& id : due) advance(id, now);
  return static_cast<std::size_t>(state_.last_seq - before);
}

void Experiment::disconnect(const ParticipantId& who, Timestamp now) {
  const auto& p = participant(who);
  if (!p.connected) return;
  std::optional<TeamId> team_id = p.team_id;
  if (team_id && team(*team_id).finished()) return;
  emit(now, EventKind::participant_disconnected, team_id, who, {{"reason", "connection_lost"}});
  if (!team_id) return;
  const auto& t = team(*team_id);
  if (t.active.size() < static_cast<std::size_t>(config_.min_team_size)) {
    terminate(*team_id, now);
  } else {
    advance_if_settled(*team_id, now);
  }
}

void Experiment::reconnect(const ParticipantId& who, Timestamp now) {
  const auto& p = participant(who);
  if (p.connected) return;
  bool restored = true;
  std::optional<TeamId> team_id = p.team_id;
  if (team_id) {
    const auto& t = team(*team_id);
    auto it = t.disconnected_in.find(who);
    restored = !t.finished() && it != t.disconnected_in.end() && it->second == t.phase;
  } else if (p.released) {
    restored = false;
  }
  emit(now, EventKind::participant_reconnected, team_id, who, {{"restored", restored}});
  if (!team_id) form_teams(now);
}

ChatEntry Experiment::post_message(const ParticipantId& who, const std::string& body,
                                   Timestamp now) {
  const auto& t = active_team_of(who);
  const auto tag = chat::accept_tag(t);
  chat::validate_body(body);
  const auto& p = participant(who);
  emit(now, EventKind::message_posted, t.id, who,
       {{"message_id", t.next_message_id},
        {"pseudonym", *p.pseudonym},
        {"body", body},
        {"phase", tag}});
  return team(t.id).transcript.back();
}

void Experiment::signal_done(const ParticipantId& who, Timestamp now) {
  const auto& t = active_team_of(who);
  if (t.phase != Phase::discuss && t.phase != Phase::decide) {
    throw CommandError(ErrorCode::phase_closed,
                       "nothing to finish in phase " + std::string(to_string(t.phase)));
  }
  done_[t.id].insert(who);
  advance_if_settled(t.id, now);
}

void Experiment::submit_team_ranking(const ParticipantId& who, const std::vector<int>& ranking,
                                     bool agreed, Timestamp now) {
  const auto& t = active_team_of(who);
  if (t.phase != Phase::discuss) {
    throw CommandError(ErrorCode::not_accepting, "not accepting rankings");
  }
  RankVector rv(ranking);
  if (rv.size() != config_.proposal_count()) {
    throw ValidationError("ranking covers " + std::to_string(rv.size()) + " proposals, expected " +
                          std::to_string(config_.proposal_count()));
  }
  const auto team_id = t.id;
  emit(now, EventKind::team_ranking_submitted, team_id, who,
       {{"ranking", ranking}, {"agreed", agreed}});
  announce(team_id, *participant(who).pseudonym + " submitted the team ranking.", now);
}

void Experiment::submit_team_allocation(const ParticipantId& who,
                                        const std::vector<std::int64_t>& amounts, Timestamp now) {
  const auto& t = active_team_of(who);
  if (t.phase != Phase::decide) {
    throw CommandError(ErrorCode::not_accepting, "not accepting allocations");
  }
  if (amounts.size() != config_.proposal_count()) {
    throw ValidationError("allocation covers " + std::to_string(amounts.size()) +
                          " proposals, expected " + std::to_string(config_.proposal_count()));
  }
  AllocationVector av(amounts, config_.budget);
  const auto team_id = t.id;
  emit(now, EventKind::team_allocation_submitted, team_id, who, {{"amounts", amounts}});
  announce(team_id, *participant(who).pseudonym + " submitted the team allocation.", now);
}

void Experiment::submit_self_report(const ParticipantId& who, int score, Timestamp now) {
  const auto& t = active_team_of(who);
  intervention::check_self_report(t, who, score);
  const auto team_id = t.id;
  emit(now, EventKind::self_report_submitted, team_id, who, {{"score", score}});
  advance_if_settled(team_id, now);
}

void Experiment::submit_guesses(const ParticipantId& who,
                                const std::map<ParticipantId, int>& guesses, Timestamp now) {
  const auto& t = active_team_of(who);
  intervention::check_guesses(t, who, guesses);
  const auto team_id = t.id;
  emit(now, EventKind::guesses_submitted, team_id, who, {{"guesses", guesses}});
  advance_if_settled(team_id, now);
}

void Experiment::acknowledge_feedback(const ParticipantId& who, Timestamp now) {
  const auto& t = active_team_of(who);
  if (t.phase != Phase::interlude || !t.exercise ||
      t.exercise->stage != ExerciseStage::feedback) {
    throw CommandError(ErrorCode::phase_closed, "no feedback to acknowledge");
  }
  acks_[t.id].insert(who);
  advance_if_settled(t.id, now);
}

void Experiment::submit_exit_survey(const ParticipantId& who, const ExitSurveyResponse& response,
                                    Timestamp now) {
  const auto& t = active_team_of(who);
  if (t.phase != Phase::exit_survey) {
    throw CommandError(ErrorCode::not_accepting, "exit survey is not open");
  }
  if (t.exit_surveys.contains(who)) {
    throw CommandError(ErrorCode::duplicate, who + " already submitted the exit survey");
  }
  const auto& survey = config_.survey;
  std::set<std::string> likert_items;
  for (const auto& scale : survey.scales) {
    for (const auto& item : scale.items) likert_items.insert(item.id);
  }
  for (const auto& item : likert_items) {
    auto it = response.likert.find(item);
    if (it == response.likert.end()) throw ValidationError("missing answer for " + item);
    if (it->second < 1 || it->second > survey.likert_points) {
      throw ValidationError("answer " + std::to_string(it->second) + " for " + item +
                            " outside 1.." + std::to_string(survey.likert_points));
    }
  }
  for (const auto& [item, _] : response.likert) {
    if (!likert_items.contains(item)) throw ValidationError("unknown survey item " + item);
  }
  for (const auto& item : survey.binary_items) {
    if (!response.binary.contains(item.id)) throw ValidationError("missing answer for " + item.id);
  }
  for (const auto& [item, _] : response.binary) {
    auto known = std::any_of(survey.binary_items.begin(), survey.binary_items.end(),
                             [&](const SurveyItem& s) { return s.id == item; });
    if (!known) throw ValidationError("unknown survey item " + item);
  }
  for (const auto& [item, text] : response.open) {
    auto known = std::any_of(survey.open_items.begin(), survey.open_items.end(),
                             [&](const SurveyItem& s) { return s.id == item; });
    if (!known) throw ValidationError("unknown survey item " + item);
    if (chat::utf8_length(text) > chat::kMaxMessageLength) {
      throw ValidationError("answer to " + item + " is too long");
    }
  }
  if (response.allocation.size() != config_.proposal_count()) {
    throw ValidationError("allocation covers " + std::to_string(response.allocation.size()) +
                          " proposals, expected " + std::to_string(config_.proposal_count()));
  }
  AllocationVector av(response.allocation, config_.budget);
  const auto team_id = t.id;
  emit(now, EventKind::exit_survey_submitted, team_id, who, to_json(response));
  advance_if_settled(team_id, now);
}

void Experiment::announce(const TeamId& id, const std::string& text, Timestamp now) {
  emit(now, EventKind::system_announced, id, std::nullopt,
       {{"message_id", team(id).next_message_id}, {"text", text}});
}

void Experiment::start_phase(const TeamId& id, Phase phase, Millis duration, Timestamp now,
                             json extra) {
  extra["phase"] = to_string(phase);
  extra["duration_ms"] = duration.count();
  emit(now, EventKind::phase_started, id, std::nullopt, std::move(extra));
}

void Experiment::begin_interlude(const TeamId& id, Timestamp now) {
  if (team(id).condition == Condition::control) {
    start_phase(id, Phase::interlude, config_.pause, now, {{"variant", "control"}});
    announce(id, std::string(intervention::kControlPausePrompt), now);
    return;
  }
  start_phase(id, Phase::interlude, config_.exercise_stage, now,
              {{"variant", "intervention"}, {"stage", "self_report"}});
  if (chat::lock_transition_needed(team(id), true)) {
    emit(now, EventKind::chat_locked, id, std::nullopt, json::object());
  }
}

void Experiment::start_guessing(const TeamId& id, Timestamp now) {
  start_phase(id, Phase::interlude, config_.exercise_stage, now,
              {{"variant", "intervention"},
               {"stage", "guessing"},
               {"rosters", intervention::build_rosters(team(id))}});
}

void Experiment::start_feedback(const TeamId& id, Timestamp now) {
  start_phase(id, Phase::interlude, config_.feedback, now,
              {{"variant", "intervention"}, {"stage", "feedback"}});
  const auto feedback = intervention::compute_feedback(*team(id).exercise);
  emit(now, EventKind::feedback_computed, id, std::nullopt, intervention::to_json(feedback));
}

void Experiment::finish_exercise(const TeamId& id, Timestamp now) {
  if (chat::lock_transition_needed(team(id), false)) {
    emit(now, EventKind::chat_unlocked, id, std::nullopt, json::object());
  }
  start_decide(id, now);
}

void Experiment::start_decide(const TeamId& id, Timestamp now) {
  start_phase(id, Phase::decide, config_.decide, now);
  announce(id,
           "Decide phase: " + clock_text(config_.decide) + " remaining. Agree on how to allocate " +
               std::to_string(config_.budget) + " across the proposals and submit it.",
           now);
}

void Experiment::start_exit_survey(const TeamId& id, Timestamp now) {
  start_phase(id, Phase::exit_survey, config_.exit_survey_timeout, now);
  announce(id, "The task is over. Please complete the exit survey.", now);
}

void Experiment::complete(const TeamId& id, Timestamp now) {
  emit(now, EventKind::team_completed, id, std::nullopt, json::object());
}

void Experiment::terminate(const TeamId& id, Timestamp now) {
  if (chat::lock_transition_needed(team(id), false)) {
    emit(now, EventKind::chat_unlocked, id, std::nullopt, json::object());
  }
  announce(id,
           "Too many teammates have left, so this session has ended. Thank you for taking part.",
           now);
  emit(now, EventKind::team_terminated, id, std::nullopt,
       {{"reason", "below_min_team_size"},
        {"active_count", static_cast<std::int64_t>(team(id).active.size())}});
}

void Experiment::advance(const TeamId& id, Timestamp now) {
  const auto& t = team(id);
  switch (t.phase) {
    case Phase::discuss:
      begin_interlude(id, now);
      break;
    case Phase::interlude:
      if (t.condition == Condition::control) {
        start_decide(id, now);
        break;
      }
      switch (t.exercise->stage) {
        case ExerciseStage::self_report:
          start_guessing(id, now);
          break;
        case ExerciseStage::guessing:
          start_feedback(id, now);
          break;
        case ExerciseStage::feedback:
          finish_exercise(id, now);
          break;
        case ExerciseStage::done:
          break;
      }
      break;
    case Phase::decide:
      start_exit_survey(id, now);
      break;
    case Phase::exit_survey:
      complete(id, now);
      break;
    case Phase::terminated:
    case Phase::complete:
      break;
  }
}

void Experiment::advance_if_settled(const TeamId& id, Timestamp now) {
  const auto& t = team(id);
  if (t.finished() || t.active.empty()) return;
  auto everyone = [&](const std::set<ParticipantId>& s) {
    return std::all_of(t.active.begin(), t.active.end(),
                       [&](const ParticipantId& p) { return s.contains(p); });
  };
  bool settled = false;
  switch (t.phase) {
    case Phase::discuss:
    case Phase::decide:
      settled = done_.contains(id) && everyone(done_[id]);
      break;
    case Phase::interlude:
      if (t.condition == Condition::control || !t.exercise) break;
      switch (t.exercise->stage) {
        case ExerciseStage::self_report:
          settled = intervention::self_reports_complete(t);
          break;
        case ExerciseStage::guessing:
          settled = intervention::guesses_complete(t);
          break;
        case ExerciseStage::feedback:
          settled = acks_.contains(id) && everyone(acks_[id]);
          break;
        case ExerciseStage::done:
          break;
      }
      break;
    case Phase::exit_survey:
      settled = std::all_of(t.active.begin(), t.active.end(),
                            [&](const ParticipantId& p) { return t.exit_surveys.contains(p); });
      break;
    default:
      break;
  }
  if (settled) advance(id, now);
}

}  // namespace teamspace
