#include "cholec/session/server.hpp"

#include <chrono>
#include <deque>
#include <iostream>
#include <set>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "cholec/common/errors.hpp"

namespace cholec::session {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

constexpr std::size_t kMaxQueuedFrames = 4;

class WsClient;

}  // namespace

struct SessionServer::Impl : std::enable_shared_from_this<SessionServer::Impl> {
  explicit Impl(std::unique_ptr<SessionCore> c) : core(std::move(c)), acceptor(ioc), timer(ioc) {}

  void listen();
  void accept();
  void start_timer();
  void on_tick();
  void broadcast(const std::string& text, bool droppable);
  nlohmann::json health() const;

  std::unique_ptr<SessionCore> core;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  asio::steady_timer timer;
  std::chrono::steady_clock::time_point next_tick;
  std::set<std::shared_ptr<WsClient>> clients;
  std::int64_t max_ticks = 0;
  std::int64_t ticks_run = 0;
};

namespace {

class WsClient : public std::enable_shared_from_this<WsClient> {
 public:
  WsClient(tcp::socket socket, std::shared_ptr<SessionServer::Impl> server)
      : ws_(std::move(socket)), server_(std::move(server)) {}

  void start(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->server_->clients.insert(self);
      nlohmann::json hello{{"type", "hello"},
                           {"schema_version", kSchemaVersion},
                           {"config", to_json(self->server_->core->config())}};
      self->send(std::make_shared<std::string>(hello.dump()), false);
      self->read();
    });
  }

  void send(std::shared_ptr<const std::string> msg, bool droppable) {
    if (droppable && queue_.size() >= kMaxQueuedFrames) return;
    queue_.push_back(std::move(msg));
    if (queue_.size() == 1) write();
  }

  void close() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->on_disconnect();
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      try {
        const InputMessage m = parse_input(nlohmann::json::parse(text));
        self->client_id_ = m.client_id;
        self->instruments_.insert(m.instrument);
        self->server_->core->submit(m);
      } catch (const std::exception& e) {
        self->send(std::make_shared<std::string>(error_json(e.what()).dump()), false);
      }
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(asio::buffer(*queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return self->on_disconnect();
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->write();
                    });
  }

  void on_disconnect() {
    if (gone_) return;
    gone_ = true;
    for (auto i : instruments_) server_->core->disconnect(i, client_id_.empty() ? "?" : client_id_);
    server_->clients.erase(shared_from_this());
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<SessionServer::Impl> server_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  std::set<env::Instrument> instruments_;
  std::string client_id_;
  bool gone_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, std::shared_ptr<SessionServer::Impl> server)
      : stream_(std::move(socket)), server_(std::move(server)) {}

  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (ec) return;
                       self->handle();
                     });
  }

 private:
  void handle() {
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == "/session") {
        stream_.expires_never();
        std::make_shared<WsClient>(stream_.release_socket(), server_)->start(std::move(req_));
        return;
      }
    }
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(req_.version());
    res->keep_alive(req_.keep_alive());
    res->set(http::field::content_type, "application/json");
    if (req_.method() != http::verb::get) {
      res->result(http::status::method_not_allowed);
      res->body() = error_json("only GET is supported").dump();
    } else if (req_.target() == "/health") {
      res->result(http::status::ok);
      res->body() = server_->health().dump();
    } else if (req_.target() == "/config") {
      res->result(http::status::ok);
      res->body() = to_json(server_->core->config()).dump();
    } else {
      res->result(http::status::not_found);
      res->body() = error_json("no such endpoint: " + std::string(req_.target())).dump();
    }
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (res->keep_alive()) {
        self->read();
      } else {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      }
    });
  }

  beast::tcp_stream stream_;
  std::shared_ptr<SessionServer::Impl> server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace

void SessionServer::Impl::listen() {
  const auto& cfg = core->config();
  beast::error_code ec;
  const auto address = asio::ip::make_address(cfg.bind_address, ec);
  if (ec) throw IoError("invalid bind address '" + cfg.bind_address + "': " + ec.message());
  const tcp::endpoint endpoint(address, cfg.port);
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw IoError("cannot listen on " + cfg.bind_address + ":" + std::to_string(cfg.port) + ": " +
                  ec.message());
  }
}

void SessionServer::Impl::accept() {
  acceptor.async_accept(
      asio::make_strand(ioc), [self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
        if (ec) return;  // acceptor closed
        std::make_shared<HttpConnection>(std::move(socket), self)->read();
        self->accept();
      });
}

void SessionServer::Impl::start_timer() {
  next_tick = std::chrono::steady_clock::now();
  on_tick();
}

void SessionServer::Impl::on_tick() {
  const auto period = std::chrono::nanoseconds(1'000'000'000LL / core->config().tick_rate_hz);
  TickOutput out;
  try {
    out = core->tick();
  } catch (const std::exception& e) {
    broadcast(error_json(std::string("simulation stopped: ") + e.what()).dump(), false);
    std::cerr << "session: " << e.what() << "\n";
    ioc.stop();
    return;
  }
  for (std::size_t k = 0; k < out.messages.size(); ++k) {
    broadcast(out.messages[k].dump(), k == 0);
  }
  ++ticks_run;
  if (max_ticks > 0 && ticks_run >= max_ticks) {
    ioc.stop();
    return;
  }
  // Logical time only: a late tick never changes what is simulated, just when it is sent.
  next_tick += period;
  const auto now = std::chrono::steady_clock::now();
  if (next_tick < now) next_tick = now;
  timer.expires_at(next_tick);
  timer.async_wait([self = shared_from_this()](beast::error_code ec) {
    if (!ec) self->on_tick();
  });
}

void SessionServer::Impl::broadcast(const std::string& text, bool droppable) {
  auto msg = std::make_shared<const std::string>(text);
  for (const auto& c : clients) c->send(msg, droppable);
}

nlohmann::json SessionServer::Impl::health() const {
  return {{"status", "ok"},
          {"schema_version", kSchemaVersion},
          {"tick", core->ticks()},
          {"episode", core->episode()},
          {"paused", core->paused()},
          {"finished", core->finished()},
          {"clients", clients.size()}};
}

SessionServer::SessionServer(SessionConfig config)
    : SessionServer(config, std::make_unique<SessionCore>(config)) {}

SessionServer::SessionServer(SessionConfig config, std::unique_ptr<SessionCore> core) {
  (void)config;
  if (!core) throw ContractError("session server needs a core");
  impl_ = std::make_shared<Impl>(std::move(core));
  impl_->listen();
}

SessionServer::~SessionServer() {
  stop();
  // Break the reference cycles held by pending handlers.
  impl_->ioc.restart();
  beast::error_code ec;
  impl_->acceptor.close(ec);
  for (const auto& c : impl_->clients) c->close();
  impl_->clients.clear();
  impl_->timer.cancel();
  impl_->ioc.poll();
}

std::uint16_t SessionServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void SessionServer::run(std::int64_t max_ticks) {
  impl_->max_ticks = max_ticks;
  impl_->ticks_run = 0;
  impl_->accept();
  asio::post(impl_->ioc, [impl = impl_] { impl->start_timer(); });
  impl_->ioc.run();
}

void SessionServer::stop() { impl_->ioc.stop(); }

SessionCore& SessionServer::core() { return *impl_->core; }

}  // namespace cholec::session
