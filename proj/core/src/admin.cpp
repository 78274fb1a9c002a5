#include <httplib.h>

#include "iglu/net.hpp"

namespace iglu::net {

namespace {

using nlohmann::json;
using server::ServerErrc;
using server::ServerError;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  auto body = json::parse(req.body, nullptr, false);
  if (body.is_discarded()) throw ServerError(ServerErrc::InvalidRequest, "request body is not JSON");
  return body;
}

std::string required_string(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_string()) {
    throw ServerError(ServerErrc::InvalidRequest, std::string("missing string field ") + key);
  }
  return j.at(key).get<std::string>();
}

/// Wraps a handler so domain errors become JSON error responses.
template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServerError& e) {
      send_json(res, http_status(e.code()), {{"error", server::to_string(e.code())}, {"detail", e.what()}});
    } catch (const json::exception& e) {
      send_json(res, 400, {{"error", "InvalidRequest"}, {"detail", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "Internal"}, {"detail", e.what()}});
    }
  };
}

}  // namespace

int http_status(ServerErrc code) {
  switch (code) {
    case ServerErrc::UnknownAgent:
    case ServerErrc::UnknownTask:
    case ServerErrc::UnknownSession:
    case ServerErrc::UnknownComparison:
    case ServerErrc::UnknownLease: return 404;
    case ServerErrc::DuplicateAgentId:
    case ServerErrc::CodeAlreadyUsed:
    case ServerErrc::AgentUnavailable:
    case ServerErrc::WrongPhase:
    case ServerErrc::SessionEnded:
    case ServerErrc::VerdictNotReady:
    case ServerErrc::VerdictAlreadySubmitted: return 409;
    case ServerErrc::LeaseExpired: return 410;
    case ServerErrc::CollectionDisabled:
    case ServerErrc::NotParticipant: return 403;
    case ServerErrc::RuleViolation:
    case ServerErrc::MissingQuestion:
    case ServerErrc::ValidationError: return 422;
    case ServerErrc::InvalidCode:
    case ServerErrc::InvalidEvent:
    case ServerErrc::SameAgent:
    case ServerErrc::InvalidRequest: return 400;
  }
  return 400;
}

struct AdminServer::Impl {
  httplib::Server http;
  std::thread thread;
  bool started = false;
};

AdminServer::AdminServer(server::GameServer& game, const std::string& host, std::uint16_t port,
                         const std::string& web_root)
    : impl_(std::make_unique<Impl>()) {
  auto& http = impl_->http;
  auto* g = &game;
  // The library default adds SO_REUSEPORT, which lets a second server share
  // the port silently; a clash must fail instead.
  http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });

  http.Get("/health", guarded([](const auto&, auto& res) { send_json(res, 200, {{"ok", true}}); }));

  http.Post("/tasks", guarded([g](const httplib::Request& req, httplib::Response& res) {
              const json body = parse_body(req);
              json ids = json::array();
              for (const auto& t : body.is_array() ? body : json::array({body})) {
                session::Task task;
                try {
                  task = session::task_from_json(t);
                } catch (const std::invalid_argument& e) {
                  throw ServerError(ServerErrc::InvalidRequest, e.what());
                }
                ids.push_back(task.id);
                g->add_task(std::move(task));
              }
              send_json(res, 201, {{"ids", ids}});
            }));
  http.Get("/tasks", guarded([g](const auto&, auto& res) {
             json out = json::array();
             for (const auto& t : g->tasks()) out.push_back(session::to_json(t));
             send_json(res, 200, out);
           }));
  http.Get("/agents", guarded([g](const auto&, auto& res) {
             json out = json::array();
             for (const auto& a : g->agents()) out.push_back({{"agentId", a}, {"busy", g->agent_busy(a)}});
             send_json(res, 200, out);
           }));
  http.Post("/join-codes", guarded([g](const httplib::Request& req, httplib::Response& res) {
              const json body = parse_body(req);
              const auto code = g->mint_join_code(required_string(body, "agentId"), required_string(body, "taskId"));
              send_json(res, 201, {{"joinCode", code}});
            }));
  http.Post("/comparisons", guarded([g](const httplib::Request& req, httplib::Response& res) {
              const json body = parse_body(req);
              const auto& agents = body.at("agents");
              if (!agents.is_array() || agents.size() != 2) {
                throw ServerError(ServerErrc::InvalidRequest, "agents must list exactly two agent ids");
              }
              std::optional<std::uint64_t> seed;
              if (body.contains("seed") && !body.at("seed").is_null()) seed = body.at("seed").get<std::uint64_t>();
              const auto c = g->create_comparison(required_string(body, "taskId"), agents[0].get<std::string>(),
                                                  agents[1].get<std::string>(), seed);
              send_json(res, 201, server::to_json(c));
            }));
  http.Get(R"(/comparisons/([\w-]+))", guarded([g](const httplib::Request& req, httplib::Response& res) {
             const auto c = g->comparison(req.matches[1]);
             if (!c) throw ServerError(ServerErrc::UnknownComparison, "no comparison " + std::string(req.matches[1]));
             send_json(res, 200, server::to_json(*c));
           }));
  http.Get(R"(/comparisons/([\w-]+)/participant)", guarded([g](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 200, g->participant_view(req.matches[1]));
           }));
  http.Post(R"(/comparisons/([\w-]+)/verdict)", guarded([g](const httplib::Request& req, httplib::Response& res) {
              const json body = parse_body(req);
              int winner = 0;
              const auto& w = body.at("winner");
              if (w.is_number_integer()) winner = w.get<int>();
              if (w == "Agent 1") winner = 1;
              if (w == "Agent 2") winner = 2;
              std::array<std::string, 2> feedback;
              if (body.contains("feedback") && body.at("feedback").is_object()) {
                feedback[0] = body.at("feedback").value("Agent 1", "");
                feedback[1] = body.at("feedback").value("Agent 2", "");
              }
              const auto outcome = g->submit_verdict(req.matches[1], winner, feedback);
              send_json(res, 201, metrics::to_json(outcome));
            }));
  http.Get("/outcomes", guarded([g](const auto&, auto& res) {
             json out = json::array();
             for (const auto& o : g->outcomes()) out.push_back(metrics::to_json(o));
             send_json(res, 200, out);
           }));
  http.Get(R"(/logs/(\w+))", guarded([g](const httplib::Request& req, httplib::Response& res) {
             auto log = g->log_by_completion_code(req.matches[1]);
             if (!log) {
               send_json(res, 404, {{"error", "UnknownCompletionCode"}, {"detail", "no session for this code"}});
               return;
             }
             send_json(res, 200, *log);
           }));
  http.Get("/stats", guarded([g](const auto&, auto& res) { send_json(res, 200, g->stats()); }));

  http.Post("/collection/games", guarded([g](const httplib::Request& req, httplib::Response& res) {
              const json body = parse_body(req);
              send_json(res, 201, {{"gameId", g->open_collection_game(required_string(body, "taskId"))}});
            }));
  http.Post("/collection/next", guarded([g](const httplib::Request& req, httplib::Response& res) {
              const json body = parse_body(req);
              const auto turn = g->next_open_turn(required_string(body, "annotatorId"));
              if (!turn) {
                res.status = 204;
                return;
              }
              send_json(res, 200, server::to_json(*turn, std::chrono::steady_clock::now()));
            }));
  http.Post("/collection/submit", guarded([g](const httplib::Request& req, httplib::Response& res) {
              const json body = parse_body(req);
              const auto ids = g->submit_single_turn(required_string(body, "leaseId"),
                                                     server::turn_submission_from_json(body));
              send_json(res, 201, {{"recordIds", ids}});
            }));

  if (!web_root.empty() && !http.set_mount_point("/", web_root)) {
    throw NetError(NetError::Kind::BindFailed, "web root " + web_root + " is not a directory");
  }

  const int bound = port == 0 ? http.bind_to_any_port(host) : (http.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) {
    throw NetError(NetError::Kind::BindFailed, "cannot listen on " + host + ":" + std::to_string(port));
  }
  port_ = static_cast<std::uint16_t>(bound);
}

AdminServer::~AdminServer() { stop(); }

void AdminServer::start() {
  if (impl_->started) return;
  impl_->started = true;
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void AdminServer::stop() {
  if (!impl_ || !impl_->started) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  impl_->started = false;
}

// ---------------------------------------------------------------------------

struct AdminClient::Impl {
  Impl(const std::string& host, std::uint16_t port) : client(host, port) {
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
  }
  httplib::Client client;
};

AdminClient::AdminClient(std::string host, std::uint16_t port) : impl_(std::make_unique<Impl>(host, port)) {}
AdminClient::~AdminClient() = default;

namespace {

json unwrap(const httplib::Result& r, const std::string& path) {
  if (!r) throw NetError(NetError::Kind::ConnectionRefused, path + ": " + httplib::to_string(r.error()));
  json body = r->body.empty() ? json(nullptr) : json::parse(r->body, nullptr, false);
  if (r->status < 200 || r->status >= 300) {
    const std::string code = body.is_object() ? body.value("error", "HttpError") : "HttpError";
    const std::string detail = body.is_object() ? body.value("detail", r->body) : r->body;
    throw AdminError(r->status, code, detail);
  }
  return body.is_discarded() ? json(r->body) : body;
}

}  // namespace

json AdminClient::get(const std::string& path) { return unwrap(impl_->client.Get(path), path); }

json AdminClient::post(const std::string& path, const json& body) {
  return unwrap(impl_->client.Post(path, body.dump(), "application/json"), path);
}

}  // namespace iglu::net
