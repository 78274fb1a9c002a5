#include <poll.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "iglu/net.hpp"

namespace iglu::net {

namespace {

namespace asio = boost::asio;
namespace websocket = boost::beast::websocket;
using asio::ip::tcp;
using nlohmann::json;
using steady = std::chrono::steady_clock;

constexpr std::size_t kMaxLine = 1 << 20;

/// Waits for the descriptor to become readable. False on timeout.
bool wait_readable(int fd, std::chrono::milliseconds timeout) {
  pollfd p{fd, POLLIN, 0};
  const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
  return rc > 0;
}

std::int64_t ticks() { return steady::now().time_since_epoch().count(); }

}  // namespace

// ---------------------------------------------------------------------------
// Client

struct LineStream::Impl {
  asio::io_context context;
  tcp::socket socket{context};
  asio::streambuf buffer{kMaxLine};
  std::mutex write_mutex;
};

LineStream::LineStream(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
LineStream::~LineStream() { close(); }

std::unique_ptr<LineStream> LineStream::connect(const std::string& host, std::uint16_t port) {
  auto impl = std::make_unique<Impl>();
  boost::system::error_code ec;
  tcp::resolver resolver(impl->context);
  const auto endpoints = resolver.resolve(host, std::to_string(port), ec);
  if (!ec) asio::connect(impl->socket, endpoints, ec);
  if (ec) throw NetError(NetError::Kind::ConnectionRefused, host + ":" + std::to_string(port) + ": " + ec.message());
  impl->socket.set_option(tcp::no_delay(true), ec);
  return std::unique_ptr<LineStream>(new LineStream(std::move(impl)));
}

void LineStream::send(const json& message) {
  const std::string line = message.dump() + "\n";
  std::lock_guard lock(impl_->write_mutex);
  boost::system::error_code ec;
  asio::write(impl_->socket, asio::buffer(line), ec);
  if (ec) throw NetError(NetError::Kind::Closed, "send failed: " + ec.message());
}

std::optional<json> LineStream::receive(std::chrono::milliseconds timeout) {
  auto& buf = impl_->buffer;
  const auto deadline = steady::now() + timeout;
  for (;;) {
    const auto data = buf.data();
    const auto begin = asio::buffers_begin(data);
    const auto end = asio::buffers_end(data);
    const auto newline = std::find(begin, end, '\n');
    if (newline != end) {
      std::string line(begin, newline);
      buf.consume(line.size() + 1);
      if (line.empty()) continue;
      auto value = json::parse(line, nullptr, false);
      if (value.is_discarded()) throw NetError(NetError::Kind::Protocol, "received a line that is not JSON");
      return value;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - steady::now());
    if (left.count() <= 0 || !wait_readable(impl_->socket.native_handle(), left)) return std::nullopt;
    boost::system::error_code ec;
    const std::size_t room = std::min<std::size_t>(65536, buf.max_size() - buf.size());
    if (room == 0) throw NetError(NetError::Kind::Protocol, "line exceeds the size limit");
    const std::size_t n = impl_->socket.read_some(buf.prepare(room), ec);
    if (ec) throw NetError(NetError::Kind::Closed, "connection closed: " + ec.message());
    buf.commit(n);
  }
}

void LineStream::close() {
  if (!impl_) return;
  boost::system::error_code ec;
  impl_->socket.shutdown(tcp::socket::shutdown_both, ec);
  impl_->socket.close(ec);
}

// ---------------------------------------------------------------------------
// Server

struct WireServer::Acceptor {
  asio::io_context context;
  tcp::acceptor acceptor{context};
};

struct WireServer::Connection : server::Endpoint, std::enable_shared_from_this<WireServer::Connection> {
  enum class Kind { Unknown, Agent, Human };

  Connection(server::GameServer& g, tcp::socket s) : game(g), socket(std::move(s)) { last_activity = ticks(); }

  void send(const json& message) override {
    std::lock_guard lock(write_mutex);
    if (!open) throw NetError(NetError::Kind::Closed, "connection closed");
    boost::system::error_code ec;
    const std::string text = message.dump();
    if (ws) {
      ws->text(true);
      ws->write(asio::buffer(text), ec);
    } else {
      const std::string line = text + "\n";
      asio::write(socket, asio::buffer(line), ec);
    }
    if (ec) {
      open = false;
      throw NetError(NetError::Kind::Closed, "send failed: " + ec.message());
    }
  }

  void shutdown() {
    open = false;
    boost::system::error_code ec;
    socket.shutdown(tcp::socket::shutdown_both, ec);
  }

  /// Next message, or nullopt at end of stream.
  std::optional<std::string> read() {
    boost::system::error_code ec;
    if (ws) {
      boost::beast::flat_buffer frame;
      ws->read(frame, ec);
      if (ec) return std::nullopt;
      return boost::beast::buffers_to_string(frame.data());
    }
    const std::size_t n = asio::read_until(socket, buffer, '\n', ec);
    if (ec) return std::nullopt;
    std::string line(asio::buffers_begin(buffer.data()), asio::buffers_begin(buffer.data()) + n - 1);
    buffer.consume(n);
    return line;
  }

  void reply(const json& message) {
    try {
      send(message);
    } catch (const NetError&) {
    }
  }

  void reject(const json& ref, std::string_view code, const std::string& detail) {
    reply({{"type", "reject"}, {"ref", ref}, {"code", code}, {"detail", detail}});
  }

  void run();
  void handle(const json& message);
  void cleanup();

  server::GameServer& game;
  tcp::socket socket;
  std::unique_ptr<websocket::stream<tcp::socket&>> ws;
  asio::streambuf buffer{kMaxLine};
  std::mutex write_mutex;
  std::atomic<bool> open{true};
  std::atomic<bool> finished{false};
  std::atomic<std::int64_t> last_activity{0};
  std::thread thread;

  Kind kind = Kind::Unknown;
  std::string id;
  std::vector<std::string> sessions;
};

void WireServer::Connection::run() {
  try {
    char first = 0;
    boost::system::error_code ec;
    socket.receive(asio::buffer(&first, 1), tcp::socket::message_peek, ec);
    if (!ec && first == 'G') {
      ws = std::make_unique<websocket::stream<tcp::socket&>>(socket);
      ws->accept(ec);
      if (ec) ws.reset(), open = false;
    } else if (ec) {
      open = false;
    }
    while (open) {
      auto text = read();
      if (!text) break;
      last_activity = ticks();
      if (text->empty()) continue;
      auto message = json::parse(*text, nullptr, false);
      if (message.is_discarded() || !message.is_object()) {
        reply({{"type", "error"}, {"code", "InvalidRequest"}, {"detail", "message is not a JSON object"}});
        continue;
      }
      handle(message);
    }
  } catch (const std::exception&) {
  }
  cleanup();
  finished = true;
}

void WireServer::Connection::handle(const json& m) {
  const std::string type = m.value("type", "");
  const json ref = m.contains("ref") ? m.at("ref") : json(nullptr);
  using server::ServerError;
  try {
    if (type == "ping") {
      reply({{"type", "pong"}, {"ref", ref}});
      return;
    }
    if (type == "bye") {
      shutdown();
      return;
    }
    if (type == "hello") {
      if (kind != Kind::Unknown) throw ServerError(server::ServerErrc::InvalidRequest, "hello was already sent");
      const std::string role = m.value("role", "");
      if (role == "agent") {
        const auto agent_id = m.value("agentId", "");
        try {
          game.register_agent(agent_id, shared_from_this());
        } catch (const ServerError& e) {
          reply({{"type", "error"}, {"ref", ref}, {"code", to_string(e.code())}, {"detail", e.what()}});
          shutdown();
          return;
        }
        kind = Kind::Agent;
        id = agent_id;
      } else if (role == "human") {
        kind = Kind::Human;
        id = m.contains("humanId") && m.at("humanId").is_string() ? m.at("humanId").get<std::string>()
                                                                   : "human-" + server::random_token(6);
      } else {
        throw ServerError(server::ServerErrc::InvalidRequest, "hello needs role agent or human");
      }
      reply({{"type", "welcome"},
             {"ref", ref},
             {"role", role},
             {"id", id},
             {"heartbeatSeconds", game.config().heartbeat.count()}});
      return;
    }
    if (kind == Kind::Unknown) throw ServerError(server::ServerErrc::InvalidRequest, "send hello first");

    if (type == "join" || type == "resume") {
      if (kind != Kind::Human) throw ServerError(server::ServerErrc::InvalidRequest, "only humans join games");
      if (type == "join") {
        sessions.push_back(game.join_game(m.at("code").get<std::string>(), id, shared_from_this()));
      } else {
        const auto session_id = m.at("sessionId").get<std::string>();
        game.resume_game(session_id, id, shared_from_this());
        sessions.push_back(session_id);
      }
      return;
    }
    if (type == "submit") {
      const auto session_id = m.at("sessionId").get<std::string>();
      protocol::EventKind event;
      try {
        event = protocol::event_kind_from_json(m.at("event"));
      } catch (const protocol::ProtocolError& e) {
        throw ServerError(server::ServerErrc::InvalidEvent, e.what());
      }
      const auto role = kind == Kind::Agent ? protocol::PlayerRole::Builder : protocol::PlayerRole::Architect;
      const auto result = game.post_event(session_id, role, id, event);
      json ack{{"type", "ack"},
               {"ref", ref},
               {"sessionId", session_id},
               {"seq", result.seq},
               {"phase", std::string(session::to_string(result.phase))}};
      if (result.completion_code) ack["completionCode"] = *result.completion_code;
      reply(ack);
      return;
    }
    if (type == "resync") {
      const auto session_id = m.at("sessionId").get<std::string>();
      const auto events = game.events_since(session_id, m.value("fromSeq", std::uint64_t{0}));
      for (const auto& e : events) reply(protocol::to_json(e));
      const auto phase = game.phase(session_id);
      reply({{"type", "resync_done"},
             {"ref", ref},
             {"sessionId", session_id},
             {"lastSeq", events.empty() ? m.value("fromSeq", std::uint64_t{0}) : events.back().seq},
             {"phase", phase ? std::string(session::to_string(*phase)) : std::string()}});
      return;
    }
    throw ServerError(server::ServerErrc::InvalidRequest, "unknown message type '" + type + "'");
  } catch (const ServerError& e) {
    reject(ref, to_string(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    reject(ref, "InvalidRequest", std::string("malformed ") + type + ": " + e.what());
  }
}

void WireServer::Connection::cleanup() {
  open = false;
  try {
    if (kind == Kind::Agent) game.unregister_agent(id);
    if (kind == Kind::Human) {
      for (const auto& s : sessions) game.human_disconnected(s, id);
    }
  } catch (const std::exception&) {
  }
  boost::system::error_code ec;
  socket.shutdown(tcp::socket::shutdown_both, ec);
  socket.close(ec);
}

WireServer::WireServer(server::GameServer& game, const std::string& host, std::uint16_t port)
    : game_(game), acceptor_(std::make_unique<Acceptor>()) {
  try {
    tcp::endpoint endpoint(asio::ip::make_address(host), port);
    auto& a = acceptor_->acceptor;
    a.open(endpoint.protocol());
    a.set_option(tcp::acceptor::reuse_address(true));
    a.bind(endpoint);
    a.listen();
    port_ = a.local_endpoint().port();
  } catch (const std::exception& e) {
    throw NetError(NetError::Kind::BindFailed, "cannot listen on " + host + ":" + std::to_string(port) + ": " + e.what());
  }
}

WireServer::~WireServer() { stop(); }

void WireServer::start() {
  if (running_.exchange(true)) return;
  accept_thread_ = std::thread([this] { accept_loop(); });
  watchdog_thread_ = std::thread([this] { watchdog_loop(); });
}

void WireServer::accept_loop() {
  auto& a = acceptor_->acceptor;
  while (running_) {
    if (!wait_readable(a.native_handle(), std::chrono::milliseconds(100))) continue;
    tcp::socket socket(acceptor_->context);
    boost::system::error_code ec;
    a.accept(socket, ec);
    if (ec) continue;
    socket.set_option(tcp::no_delay(true), ec);
    auto connection = std::make_shared<Connection>(game_, std::move(socket));
    std::lock_guard lock(connections_mutex_);
    if (!running_) break;
    connection->thread = std::thread([connection] { connection->run(); });
    connections_.push_back(std::move(connection));
  }
}

void WireServer::watchdog_loop() {
  const auto idle_limit = std::chrono::duration_cast<steady::duration>(game_.config().heartbeat * 3);
  while (running_) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    std::vector<std::shared_ptr<Connection>> done;
    {
      std::lock_guard lock(connections_mutex_);
      const auto now = ticks();
      for (auto it = connections_.begin(); it != connections_.end();) {
        auto& c = *it;
        if (c->finished) {
          done.push_back(c);
          it = connections_.erase(it);
          continue;
        }
        if (now - c->last_activity > idle_limit.count()) c->shutdown();
        ++it;
      }
    }
    for (auto& c : done) {
      if (c->thread.joinable()) c->thread.join();
    }
  }
}

void WireServer::stop() {
  if (!running_.exchange(false)) {
    // Never started: the bound listener still has to go.
    boost::system::error_code ec;
    acceptor_->acceptor.close(ec);
    return;
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  if (watchdog_thread_.joinable()) watchdog_thread_.join();
  std::vector<std::shared_ptr<Connection>> all;
  {
    std::lock_guard lock(connections_mutex_);
    all.swap(connections_);
  }
  for (auto& c : all) c->shutdown();
  for (auto& c : all) {
    if (c->thread.joinable()) c->thread.join();
  }
  boost::system::error_code ec;
  acceptor_->acceptor.close(ec);
}

}  // namespace iglu::net
