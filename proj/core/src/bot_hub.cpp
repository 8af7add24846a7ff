#include "teamspace/bot_hub.hpp"

#include <deque>
#include <map>

namespace teamspace::bots {
namespace {

class TeeSink : public EventSink {
 public:
  explicit TeeSink(EventSink* extra) : extra_(extra) {}
  void append(const Event& e) override {
    if (extra_) extra_->append(e);
    memory_.append(e);
  }
  const std::vector<Event>& events() const { return memory_.events(); }

 private:
  EventSink* extra_;
  MemoryEventLog memory_;
};

class Hub {
 public:
  Hub(const LoopbackOptions& o, EventSink& sink)
      : options_(o), gateway_(o.config, sink, seeded_tokens(o.token_seed)) {
    for (std::size_t i = 0; i < o.scripts.size(); ++i) bots_.emplace_back(o.scripts[i], i);
    inbox_.resize(bots_.size());
    conn_of_.resize(bots_.size());
    gateway_.set_frame_sink([this](ConnectionId conn, const std::string& text) {
      if (auto it = bot_of_.find(conn); it != bot_of_.end()) inbox_[it->second].push_back(text);
    });
    gateway_.set_close_sink([this](ConnectionId conn) { unbind(conn); });
  }

  LoopbackResult run() {
    auto now = options_.epoch;
    const auto end = options_.epoch + options_.limit;
    std::vector<bool> started(bots_.size(), false);
    LoopbackResult result;
    for (; now <= end; now += options_.step) {
      for (std::size_t i = 0; i < bots_.size(); ++i) {
        if (!started[i] && options_.epoch + options_.stagger * static_cast<int>(i) <= now) {
          started[i] = true;
          process(i, bots_[i].start(now), now);
        }
      }
      gateway_.tick(now);
      bool busy = true;
      while (busy) {
        busy = false;
        for (std::size_t i = 0; i < bots_.size(); ++i) {
          while (!inbox_[i].empty()) {
            busy = true;
            auto text = std::move(inbox_[i].front());
            inbox_[i].pop_front();
            process(i, bots_[i].on_frame(text, now), now);
          }
          if (started[i]) process(i, bots_[i].on_time(now), now);
        }
      }
      if (std::all_of(started.begin(), started.end(), [](bool b) { return b; }) && settled()) break;
    }
    result.ended_at = std::min(now, end);
    result.all_finished =
        std::all_of(bots_.begin(), bots_.end(), [](const Bot& b) { return b.finished(); });
    for (const auto& b : bots_) {
      result.bots.push_back(b.summary());
      result.captures.push_back(b.captured());
    }
    result.final_state = gateway_.state_copy();
    return result;
  }

 private:
  bool settled() const {
    const auto state = gateway_.state_copy();
    for (const auto& [_, t] : state.teams) {
      if (!t.finished()) return false;
    }
    const bool lobby_stuck = state.lobby.size() < static_cast<std::size_t>(options_.config.team_size);
    return std::all_of(bots_.begin(), bots_.end(), [&](const Bot& b) {
      return b.finished() || (b.waiting_in_lobby() && lobby_stuck);
    });
  }

  void unbind(ConnectionId conn) {
    auto it = bot_of_.find(conn);
    if (it == bot_of_.end()) return;
    if (conn_of_[it->second] == conn) conn_of_[it->second].reset();
    bot_of_.erase(it);
  }

  void process(std::size_t i, std::vector<Action> actions, Timestamp now) {
    std::deque<Action> queue(std::make_move_iterator(actions.begin()),
                             std::make_move_iterator(actions.end()));
    while (!queue.empty()) {
      auto a = std::move(queue.front());
      queue.pop_front();
      std::vector<Action> more;
      switch (a.kind) {
        case Action::Kind::http: {
          const auto response = gateway_.handle_http(a.request, now);
          more = bots_[i].on_http_response(a.tag, response, now);
          break;
        }
        case Action::Kind::ws_open: {
          const auto conn = next_conn_++;
          bot_of_[conn] = i;
          conn_of_[i] = conn;
          if (!gateway_.on_ws_open(conn, a.token, now)) unbind(conn);
          break;
        }
        case Action::Kind::ws_send:
          if (conn_of_[i]) gateway_.on_ws_frame(*conn_of_[i], a.frame, now);
          break;
        case Action::Kind::ws_close:
          if (auto conn = conn_of_[i]) {
            unbind(*conn);
            gateway_.on_ws_close(*conn, now);
          }
          break;
      }
      for (auto& m : more) queue.push_back(std::move(m));
    }
  }

  const LoopbackOptions& options_;
  Gateway gateway_;
  std::vector<Bot> bots_;
  std::vector<std::deque<std::string>> inbox_;
  std::vector<std::optional<ConnectionId>> conn_of_;
  std::map<ConnectionId, std::size_t> bot_of_;
  ConnectionId next_conn_ = 1;
};

}  // namespace

std::size_t LoopbackResult::violation_count() const {
  std::size_t n = 0;
  for (const auto& b : bots) n += b.violations.size();
  return n;
}

LoopbackResult run_loopback(const LoopbackOptions& options) {
  TeeSink sink(options.sink);
  Hub hub(options, sink);
  auto result = hub.run();
  result.events = sink.events();
  return result;
}

ExperimentConfig apply_overrides(const ExperimentConfig& base, const nlohmann::json& overrides) {
  nlohmann::json merged;
  to_json(merged, base);
  for (const auto& [k, v] : overrides.items()) merged[k] = v;
  return config_from_json(merged);
}

}  // namespace teamspace::bots
