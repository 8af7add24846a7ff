#include "teamspace/net/bot_runner.hpp"

#include <atomic>
#include <deque>
#include <memory>
#include <stdexcept>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast.hpp>

namespace teamspace::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using bots::Action;

namespace {

constexpr Millis kIdlePoll{250};

class Client {
 public:
  Client(bots::BotScript script, std::size_t index, Endpoint endpoint)
      : bot_(std::move(script), index), endpoint_(std::move(endpoint)), timer_(io_) {}

  void run(Millis delay) {
    timer_.expires_after(delay);
    timer_.async_wait([this](beast::error_code ec) {
      if (ec) return;
      started_ = true;
      process(bot_.start(now_utc()));
    });
    io_.run();
  }

  void stop() {
    asio::post(io_, [this] {
      stopping_ = true;
      timer_.cancel();
      if (ws_) {
        beast::error_code ignored;
        beast::get_lowest_layer(*ws_).socket().close(ignored);
      }
      io_.stop();
    });
  }

  bool finished() const { return finished_; }
  bool idle() const { return finished_ || lobby_; }
  const bots::Bot& bot() const { return bot_; }

 private:
  using Ws = websocket::stream<beast::tcp_stream>;

  void publish() {
    finished_ = bot_.finished();
    lobby_ = bot_.waiting_in_lobby();
  }

  void process(std::vector<Action> actions) {
    std::deque<Action> queue(std::make_move_iterator(actions.begin()),
                             std::make_move_iterator(actions.end()));
    while (!queue.empty() && !stopping_) {
      auto a = std::move(queue.front());
      queue.pop_front();
      std::vector<Action> more;
      switch (a.kind) {
        case Action::Kind::http:
          more = bot_.on_http_response(a.tag, fetch(a.request), now_utc());
          break;
        case Action::Kind::ws_open:
          open(a.token);
          break;
        case Action::Kind::ws_send:
          send(std::move(a.frame));
          break;
        case Action::Kind::ws_close:
          close();
          break;
      }
      for (auto& m : more) queue.push_back(std::move(m));
    }
    publish();
    arm();
  }

  void arm() {
    if (stopping_) return;
    auto delay = kIdlePoll;
    if (auto at = bot_.next_wakeup()) {
      delay = std::clamp(std::chrono::duration_cast<Millis>(*at - now_utc()), Millis{0}, kIdlePoll);
    }
    timer_.expires_after(delay);
    timer_.async_wait([this](beast::error_code ec) {
      if (ec) return;
      process(bot_.on_time(now_utc()));
    });
  }

  HttpResponse fetch(const HttpRequest& req) {
    HttpResponse out;
    try {
      tcp::resolver resolver(io_);
      beast::tcp_stream stream(io_);
      stream.connect(resolver.resolve(endpoint_.host, endpoint_.port));
      http::request<http::string_body> r(req.method == "POST" ? http::verb::post : http::verb::get,
                                         req.target, 11);
      r.set(http::field::host, endpoint_.host);
      if (!req.body.empty()) {
        r.set(http::field::content_type, "application/json");
        r.body() = req.body;
      }
      r.prepare_payload();
      http::write(stream, r);
      beast::flat_buffer buffer;
      http::response<http::string_body> res;
      http::read(stream, buffer, res);
      out.status = static_cast<int>(res.result_int());
      out.body = res.body();
      beast::error_code ignored;
      stream.socket().shutdown(tcp::socket::shutdown_both, ignored);
    } catch (const std::exception& e) {
      out.status = 0;
      out.body = e.what();
    }
    return out;
  }

  void open(const std::string& token) {
    auto ws = std::make_shared<Ws>(io_);
    try {
      tcp::resolver resolver(io_);
      beast::get_lowest_layer(*ws).connect(resolver.resolve(endpoint_.host, endpoint_.port));
      ws->handshake(endpoint_.host, "/ws?session=" + token);
    } catch (const std::exception&) {
      bot_.on_connection_lost(now_utc());
      return;
    }
    ws_ = ws;
    outbox_.clear();
    read(ws, ++generation_);
  }

  void read(std::shared_ptr<Ws> ws, std::uint64_t gen) {
    auto buffer = std::make_shared<beast::flat_buffer>();
    ws->async_read(*buffer, [this, ws, buffer, gen](beast::error_code ec, std::size_t) {
      if (stopping_ || gen != generation_) return;
      if (ec) {
        ws_.reset();
        bot_.on_connection_lost(now_utc());
        publish();
        return;
      }
      auto actions = bot_.on_frame(beast::buffers_to_string(buffer->data()), now_utc());
      read(ws, gen);
      process(std::move(actions));
    });
  }

  void send(std::string frame) {
    if (!ws_) return;
    outbox_.push_back(std::move(frame));
    if (outbox_.size() == 1) write_next();
  }

  void write_next() {
    auto ws = ws_;
    ws->text(true);
    ws->async_write(asio::buffer(outbox_.front()), [this, ws](beast::error_code ec, std::size_t) {
      if (ws != ws_) return;
      outbox_.pop_front();
      if (!ec && !outbox_.empty()) write_next();
    });
  }

  void close() {
    if (!ws_) return;
    ++generation_;
    auto ws = std::move(ws_);
    outbox_.clear();
    ws->async_close(websocket::close_code::normal, [ws](beast::error_code) {});
  }

  asio::io_context io_;
  bots::Bot bot_;
  Endpoint endpoint_;
  asio::steady_timer timer_;
  std::shared_ptr<Ws> ws_;
  std::deque<std::string> outbox_;
  std::uint64_t generation_ = 0;
  bool stopping_ = false;
  bool started_ = false;
  std::atomic<bool> finished_{false};
  std::atomic<bool> lobby_{false};
};

}  // namespace

std::size_t NetworkResult::violation_count() const {
  std::size_t n = 0;
  for (const auto& b : bots) n += b.violations.size();
  return n;
}

Endpoint parse_server_url(const std::string& url) {
  constexpr std::string_view scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw std::invalid_argument("server url must start with http://");
  auto rest = url.substr(scheme.size());
  if (auto slash = rest.find('/'); slash != std::string::npos) {
    if (rest.find_first_not_of('/', slash) != std::string::npos) {
      throw std::invalid_argument("server url must not have a path");
    }
    rest = rest.substr(0, slash);
  }
  Endpoint e;
  if (auto colon = rest.rfind(':'); colon != std::string::npos) {
    e.host = rest.substr(0, colon);
    e.port = rest.substr(colon + 1);
  } else {
    e.host = rest;
    e.port = "80";
  }
  if (e.host.empty() || e.port.empty() ||
      e.port.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("malformed server url: " + url);
  }
  return e;
}

NetworkResult run_network(const NetworkOptions& options) {
  const auto endpoint = parse_server_url(options.server_url);
  const auto begin = std::chrono::steady_clock::now();

  std::vector<std::unique_ptr<Client>> clients;
  for (std::size_t i = 0; i < options.scripts.size(); ++i) {
    clients.push_back(std::make_unique<Client>(options.scripts[i], i, endpoint));
  }
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    threads.emplace_back([&, i] { clients[i]->run(options.stagger * static_cast<int>(i)); });
  }

  NetworkResult result;
  std::optional<std::chrono::steady_clock::time_point> idle_since;
  while (true) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    const auto now = std::chrono::steady_clock::now();
    if (now - begin > options.limit) {
      result.timed_out = true;
      break;
    }
    const bool all_done = std::all_of(clients.begin(), clients.end(), [](const auto& c) { return c->finished(); });
    if (all_done) break;
    const bool all_idle = std::all_of(clients.begin(), clients.end(), [](const auto& c) { return c->idle(); });
    if (!all_idle) {
      idle_since.reset();
    } else if (!idle_since) {
      idle_since = now;
    } else if (now - *idle_since > options.lobby_grace) {
      break;
    }
  }
  for (auto& c : clients) c->stop();
  for (auto& t : threads) t.join();

  result.elapsed = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - begin);
  result.all_finished = true;
  for (const auto& c : clients) {
    result.all_finished = result.all_finished && c->finished();
    result.bots.push_back(c->bot().summary());
    result.captures.push_back(c->bot().captured());
  }
  return result;
}

}  // namespace teamspace::net
