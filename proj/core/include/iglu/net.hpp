#pragma once

// Network front ends of the game server and the matching clients.
//
// WireServer: newline-delimited JSON over TCP, one thread per connection. A
// connection whose first bytes are an HTTP GET is upgraded to a WebSocket
// carrying one JSON message per text frame (for browsers).
//
// AdminServer: organizer HTTP API plus optional static files.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "iglu/server.hpp"

namespace iglu::net {

class NetError : public std::runtime_error {
 public:
  enum class Kind { ConnectionRefused, Closed, Protocol, BindFailed };
  NetError(Kind kind, const std::string& detail) : std::runtime_error(detail), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Blocking NDJSON client connection. send() may be called from any thread;
/// receive() from one thread at a time.
class LineStream {
 public:
  /// Throws NetError(ConnectionRefused).
  static std::unique_ptr<LineStream> connect(const std::string& host, std::uint16_t port);
  ~LineStream();

  void send(const nlohmann::json& message);
  /// nullopt on timeout. Throws NetError(Closed) at end of stream and
  /// NetError(Protocol) on a line that is not JSON.
  std::optional<nlohmann::json> receive(std::chrono::milliseconds timeout);
  void close();

 private:
  struct Impl;
  explicit LineStream(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

class WireServer {
 public:
  /// Binds immediately; throws NetError(BindFailed). Port 0 is ephemeral.
  WireServer(server::GameServer& game, const std::string& host, std::uint16_t port);
  ~WireServer();

  std::uint16_t port() const noexcept { return port_; }
  void start();
  /// Closes the listener and every connection, then joins all threads.
  void stop();

  struct Connection;

 private:
  void accept_loop();
  void watchdog_loop();

  server::GameServer& game_;
  struct Acceptor;
  std::unique_ptr<Acceptor> acceptor_;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::thread watchdog_thread_;
  std::mutex connections_mutex_;
  std::vector<std::shared_ptr<Connection>> connections_;
};

class AdminServer {
 public:
  /// Binds immediately; throws NetError(BindFailed).
  AdminServer(server::GameServer& game, const std::string& host, std::uint16_t port, const std::string& web_root = {});
  ~AdminServer();

  std::uint16_t port() const noexcept { return port_; }
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
};

/// HTTP status used by the admin API for a server error.
int http_status(server::ServerErrc code);

class AdminError : public std::runtime_error {
 public:
  AdminError(int status, std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), status_(status), code_(std::move(code)) {}
  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }

 private:
  int status_;
  std::string code_;
};

/// Minimal admin API client. Non-2xx responses throw AdminError; a failed
/// connection throws NetError(ConnectionRefused).
class AdminClient {
 public:
  AdminClient(std::string host, std::uint16_t port);
  ~AdminClient();

  nlohmann::json get(const std::string& path);
  nlohmann::json post(const std::string& path, const nlohmann::json& body);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace iglu::net
