#include "teamspace/net/server.hpp"

#include <atomic>
#include <deque>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast.hpp>

#include "teamspace/errors.hpp"

namespace teamspace::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

constexpr std::size_t kMaxBody = 1 << 20;

std::string query_param(const std::string& target, const std::string& key) {
  const auto q = target.find('?');
  if (q == std::string::npos) return {};
  std::istringstream query(target.substr(q + 1));
  for (std::string pair; std::getline(query, pair, '&');) {
    if (pair.size() > key.size() && pair.compare(0, key.size(), key) == 0 &&
        pair[key.size()] == '=') {
      return pair.substr(key.size() + 1);
    }
  }
  return {};
}

std::string_view path_of(std::string_view target) {
  return target.substr(0, target.find('?'));
}

}  // namespace

struct Server::Impl {
  class WsSession;
  class HttpSession;

  Impl(Gateway& g, ServerOptions o)
      : gateway(g), options(std::move(o)), acceptor(io), ticker(io) {
    const tcp::endpoint endpoint(asio::ip::make_address(options.address), options.port);
    acceptor.open(endpoint.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(endpoint);
    acceptor.listen(asio::socket_base::max_listen_connections);
    bound_port = acceptor.local_endpoint().port();
  }

  void install_sinks();
  void accept();
  void tick();
  void check_halt();
  void shutdown();

  Gateway& gateway;
  ServerOptions options;
  asio::io_context io;
  tcp::acceptor acceptor;
  asio::steady_timer ticker;
  unsigned short bound_port = 0;
  std::atomic<bool> halted{false};
  std::thread thread;

  std::map<ConnectionId, std::weak_ptr<WsSession>> sockets;
  ConnectionId next_conn = 1;
};

class Server::Impl::WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(Impl* server, tcp::socket socket, ConnectionId id)
      : server_(server), ws_(std::move(socket)), id_(id) {}

  void accept(http::request<http::string_body> req) {
    token_ = query_param(std::string(req.target()), "session");
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void send(std::string text) {
    if (closing_) return;
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) write_next();
  }

  void close() {
    if (closing_) return;
    closing_ = true;
    if (queue_.empty()) do_close();
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    server_->sockets[id_] = weak_from_this();
    opened_ = true;
    const bool ok = server_->gateway.on_ws_open(id_, token_, server_->options.clock());
    server_->check_halt();
    if (!ok) {
      // The error frame was posted; queue the close behind it.
      opened_ = false;
      asio::post(server_->io, [self = shared_from_this()] {
        self->close();
        self->server_->sockets.erase(self->id_);
      });
      return;
    }
    read();
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_read(ec);
    });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      finish();
      return;
    }
    const auto text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    server_->gateway.on_ws_frame(id_, text, server_->options.clock());
    server_->check_halt();
    read();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(asio::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->on_write(ec);
                    });
  }

  void on_write(beast::error_code ec) {
    queue_.pop_front();
    if (ec) {
      queue_.clear();
      return;
    }
    if (!queue_.empty()) {
      write_next();
    } else if (closing_) {
      do_close();
    }
  }

  void do_close() {
    ws_.async_close(websocket::close_code::normal,
                    [self = shared_from_this()](beast::error_code) {});
  }

  void finish() {
    if (!opened_) return;
    opened_ = false;
    server_->sockets.erase(id_);
    server_->gateway.on_ws_close(id_, server_->options.clock());
    server_->check_halt();
  }

  Impl* server_;
  websocket::stream<beast::tcp_stream> ws_;
  ConnectionId id_;
  std::string token_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool opened_ = false;
  bool closing_ = false;
};

class Server::Impl::HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(Impl* server, tcp::socket socket)
      : server_(server), stream_(std::move(socket)), poll_timer_(server_->io) {}

  void read() {
    parser_.emplace();
    parser_->body_limit(kMaxBody);
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, *parser_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       self->on_read(ec);
                     });
  }

 private:
  void on_read(beast::error_code ec) {
    if (ec) {
      beast::error_code ignored;
      stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      return;
    }
    request_ = parser_->release();
    if (websocket::is_upgrade(request_)) {
      if (path_of(std::string(request_.target())) != "/ws") {
        respond({404, "application/json",
                 R"({"error":{"code":"NOT_FOUND","message":"no such route"}})", {}});
        return;
      }
      stream_.expires_never();
      auto ws = std::make_shared<WsSession>(server_, stream_.release_socket(), server_->next_conn++);
      ws->accept(std::move(request_));
      return;
    }
    serve();
  }

  void serve() {
    const HttpRequest req{std::string(request_.method_string()), std::string(request_.target()),
                          request_.body()};
    auto response = server_->gateway.handle_http(req, server_->options.clock());
    server_->check_halt();
    // The gateway restarts the wait on every call; the first deadline holds.
    if (response.poll_until && !poll_deadline_) poll_deadline_ = response.poll_until;
    if (response.poll_until && server_->options.clock() < *poll_deadline_ && !server_->halted) {
      stream_.expires_never();
      poll_timer_.expires_after(server_->options.poll_interval);
      poll_timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
        if (!ec) self->serve();
      });
      return;
    }
    respond(std::move(response));
  }

  void respond(HttpResponse r) {
    poll_deadline_.reset();
    auto res = std::make_shared<http::response<http::string_body>>(
        static_cast<http::status>(r.status), request_.version());
    res->set(http::field::server, "teamspace");
    res->set(http::field::content_type, r.content_type);
    res->set(http::field::cache_control, "no-store");
    res->keep_alive(request_.keep_alive());
    res->body() = std::move(r.body);
    res->prepare_payload();
    stream_.expires_after(std::chrono::seconds(30));
    http::async_write(stream_, *res,
                      [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
                        if (ec) return;
                        if (res->need_eof()) {
                          beast::error_code ignored;
                          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                          return;
                        }
                        self->read();
                      });
  }

  Impl* server_;
  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
  http::request<http::string_body> request_;
  asio::steady_timer poll_timer_;
  std::optional<Timestamp> poll_deadline_;
};

void Server::Impl::install_sinks() {
  // The gateway calls these with its lock held; posting keeps socket work
  // off that path and preserves order.
  gateway.set_frame_sink([self = this](ConnectionId conn, const std::string& text) {
    asio::post(self->io, [self, conn, text] {
      if (auto it = self->sockets.find(conn); it != self->sockets.end()) {
        if (auto s = it->second.lock()) s->send(text);
      }
    });
  });
  gateway.set_close_sink([self = this](ConnectionId conn) {
    asio::post(self->io, [self, conn] {
      if (auto it = self->sockets.find(conn); it != self->sockets.end()) {
        if (auto s = it->second.lock()) s->close();
      }
    });
  });
}

void Server::Impl::accept() {
  acceptor.async_accept([self = this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<HttpSession>(self, std::move(socket))->read();
    self->accept();
  });
}

void Server::Impl::tick() {
  try {
    gateway.tick(options.clock());
  } catch (const PersistenceError&) {
  }
  check_halt();
  if (halted) return;
  ticker.expires_after(options.tick_interval);
  ticker.async_wait([self = this](beast::error_code ec) {
    if (!ec) self->tick();
  });
}

void Server::Impl::check_halt() {
  if (halted || !gateway.halted()) return;
  halted = true;
  const std::string message = "event log failure: the run has halted and accepts no further commands";
  std::cerr << "teamspace: FATAL: " << message << std::endl;
  if (options.on_halt) options.on_halt(message);
  shutdown();
}

void Server::Impl::shutdown() {
  beast::error_code ignored;
  acceptor.close(ignored);
  ticker.cancel();
  io.stop();
}

Server::Server(Gateway& gateway, ServerOptions options)
    : impl_(std::make_unique<Impl>(gateway, std::move(options))) {
  impl_->install_sinks();
  impl_->accept();
  asio::post(impl_->io, [impl = impl_.get()] { impl->tick(); });
}

Server::~Server() {
  stop();
  impl_->gateway.set_frame_sink({});
  impl_->gateway.set_close_sink({});
}

unsigned short Server::port() const noexcept { return impl_->bound_port; }

void Server::run() { impl_->io.run(); }

void Server::start() {
  impl_->thread = std::thread([impl = impl_.get()] { impl->io.run(); });
}

void Server::stop() {
  impl_->io.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  beast::error_code ignored;
  impl_->acceptor.close(ignored);
}

bool Server::halted() const noexcept { return impl_->halted; }

}  // namespace teamspace::net
