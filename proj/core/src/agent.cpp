#include "iglu/agent.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <regex>
#include <thread>

namespace iglu::agent {

namespace {

using nlohmann::json;
using protocol::GameEvent;
using protocol::PlayerRole;
using steady = std::chrono::steady_clock;

constexpr std::chrono::milliseconds kPoll{100};
constexpr std::chrono::seconds kHandshakeTimeout{5};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

Coord target_of(const BuildAction& a) {
  if (const auto* p = std::get_if<PlaceBlock>(&a)) return p->at;
  return std::get<BreakBlock>(a).at;
}

bool legal(const WorldState& s, const BuildAction& a) {
  try {
    apply_action(s, a);
    return true;
  } catch (const VoxelError&) {
    return false;
  }
}

bool same_world(const WorldState& a, const WorldState& b) {
  return a.grid == b.grid && distance(a.avatar.pos, b.avatar.pos) < 1e-6 &&
         std::abs(a.avatar.pitch - b.avatar.pitch) < 1e-6 && std::abs(a.avatar.yaw - b.avatar.yaw) < 1e-6;
}

protocol::EventKind to_event(const BuildAction& a, const WorldState& next) {
  if (const auto* p = std::get_if<PlaceBlock>(&a)) return protocol::BlockPlaced{p->at, p->id};
  if (const auto* b = std::get_if<BreakBlock>(&a)) return protocol::BlockRemoved{b->at};
  return protocol::PlayerMove{PlayerRole::Builder, next.avatar.pos, next.avatar.pitch, next.avatar.yaw};
}

json receive_handshake(net::LineStream& stream) {
  const auto deadline = steady::now() + kHandshakeTimeout;
  while (steady::now() < deadline) {
    auto m = stream.receive(kPoll);
    if (m && m->contains("type")) return *m;
  }
  throw ConnectError(ConnectError::Kind::Protocol, "no reply to hello");
}

std::unique_ptr<net::LineStream> open_stream(const std::string& host, std::uint16_t port) {
  try {
    return net::LineStream::connect(host, port);
  } catch (const net::NetError& e) {
    throw ConnectError(ConnectError::Kind::ConnectionRefused, e.what());
  }
}

std::chrono::milliseconds heartbeat_from(const json& welcome) {
  return std::chrono::seconds(std::max<long long>(1, welcome.value("heartbeatSeconds", 10LL)));
}

}  // namespace

// ---------------------------------------------------------------------------
// Grammar

std::optional<std::vector<Command>> parse_command(std::string_view text, const Palette& palette) {
  static const std::regex clause(
      R"((put|place|remove)\s+(\d{1,3})\s+([a-z]+)\s+blocks?\s+at((?:\s*\(\s*-?\d{1,4}\s*,\s*-?\d{1,4}\s*,\s*-?\d{1,4}\s*\))+))");
  static const std::regex cell(R"(\(\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\))");
  static const std::regex filler(R"(^(?:[\s;,.!]|and|then)*$)");

  const std::string s = lower(text);
  std::vector<Command> out;
  std::size_t consumed = 0;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), clause); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (!std::regex_match(s.substr(consumed, static_cast<std::size_t>(m.position()) - consumed), filler)) {
      return std::nullopt;
    }
    consumed = static_cast<std::size_t>(m.position() + m.length());

    Command c;
    c.op = m[1] == "remove" ? CommandOp::Remove : CommandOp::Put;
    const auto id = palette.id_of(m[3].str());
    if (!id) return std::nullopt;
    c.id = *id;
    const std::string cells = m[4];
    for (auto ct = std::sregex_iterator(cells.begin(), cells.end(), cell); ct != std::sregex_iterator(); ++ct) {
      const Coord at{std::stoi((*ct)[1]), std::stoi((*ct)[2]), std::stoi((*ct)[3])};
      if (!in_bounds(at)) return std::nullopt;
      c.at.push_back(at);
    }
    if (c.at.size() != std::stoul(m[2].str())) return std::nullopt;
    out.push_back(std::move(c));
  }
  if (out.empty() || !std::regex_match(s.substr(consumed), filler)) return std::nullopt;
  return out;
}

std::string format_command(const Command& c, const Palette& palette) {
  const auto color = palette.name_of(c.id);
  if (!color) throw std::invalid_argument("block id " + std::to_string(c.id) + " has no color name");
  std::string out = c.op == CommandOp::Put ? "put " : "remove ";
  out += std::to_string(c.at.size()) + " " + *color + (c.at.size() == 1 ? " block at" : " blocks at");
  for (const auto& at : c.at) {
    out += " (" + std::to_string(at.x) + "," + std::to_string(at.y) + "," + std::to_string(at.z) + ")";
  }
  return out;
}

std::optional<std::vector<BuildAction>> plan_reach(const WorldState& s, const BuildAction& action,
                                                   std::size_t max_moves) {
  if (legal(s, action)) return std::vector<BuildAction>{};
  const Coord c = target_of(action);
  const bool placing = std::holds_alternative<PlaceBlock>(action);
  const Vec3 center{static_cast<double>(c.x), static_cast<double>(c.y), static_cast<double>(c.z)};
  const int radius = static_cast<int>(std::min<std::size_t>(max_moves, 4 * static_cast<std::size_t>(kWalkableHalfWidth)));

  struct Candidate {
    int cost, i, j;
    auto operator<=>(const Candidate&) const = default;
  };
  std::vector<Candidate> candidates;
  for (int i = -radius; i <= radius; ++i) {
    for (int j = -radius; j <= radius; ++j) {
      const int cost = std::abs(i) + std::abs(j);
      if (cost == 0 || static_cast<std::size_t>(cost) > max_moves) continue;
      const double x = s.avatar.pos.x + kStepLength * i;
      const double z = s.avatar.pos.z + kStepLength * j;
      if (std::abs(x) > kWalkableHalfWidth || std::abs(z) > kWalkableHalfWidth) continue;
      const double y = settle_height(s.grid, x, z);
      if (distance({x, y, z}, center) > kReachRadius) continue;
      if (placing) {
        const Coord feet{static_cast<int>(std::floor(x + 0.5)), static_cast<int>(std::floor(y + 0.5)),
                         static_cast<int>(std::floor(z + 0.5))};
        if (c == feet || c == Coord{feet.x, feet.y + 1, feet.z}) continue;
      }
      candidates.push_back({cost, i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end());
  for (const auto& cand : candidates) {
    std::vector<BuildAction> moves;
    for (int k = 0; k < std::abs(cand.i); ++k) moves.push_back(Move{cand.i > 0 ? MoveDir::East : MoveDir::West});
    for (int k = 0; k < std::abs(cand.j); ++k) moves.push_back(Move{cand.j > 0 ? MoveDir::South : MoveDir::North});
    WorldState sim = s;
    for (const auto& m : moves) sim = apply_action(sim, m);
    if (legal(sim, action)) return moves;
  }
  return std::nullopt;
}

std::optional<std::vector<BuildAction>> plan_commands(const WorldState& s, const std::vector<Command>& commands,
                                                      std::size_t max_moves) {
  WorldState sim = s;
  std::vector<BuildAction> out;
  for (const auto& c : commands) {
    for (const auto& at : c.at) {
      const BuildAction action = c.op == CommandOp::Put ? BuildAction{PlaceBlock{at, c.id}} : BuildAction{BreakBlock{at}};
      auto moves = plan_reach(sim, action, max_moves);
      if (!moves) return std::nullopt;
      for (const auto& m : *moves) sim = apply_action(sim, m);
      sim = apply_action(sim, action);
      out.insert(out.end(), moves->begin(), moves->end());
      out.push_back(action);
    }
  }
  return out;
}

AgentDecision noop_policy(const AgentObservation&) { return {{}, true, std::nullopt}; }

AgentDecision grammar_builder(const AgentObservation& obs, const Palette& palette) {
  const AgentDecision ask{{}, true, std::string(kClarifyingQuestion)};
  const auto last = std::find_if(obs.chat_history.rbegin(), obs.chat_history.rend(),
                                 [](const ChatMessage& m) { return m.role == PlayerRole::Architect; });
  if (last == obs.chat_history.rend()) return ask;
  const auto commands = parse_command(last->text, palette);
  if (!commands) return ask;
  auto actions = plan_commands(obs.world, *commands);
  if (!actions) return ask;
  return {std::move(*actions), true, std::nullopt};
}

std::vector<std::string> script_instructions(const BlockGrid& initial, const BlockGrid& target,
                                             const Palette& palette) {
  // (layer, color) -> cells; removals run top layer first, placements bottom first.
  std::map<std::pair<int, BlockId>, std::vector<Coord>> removals;
  std::map<std::pair<int, BlockId>, std::vector<Coord>> placements;
  for (const auto& [c, id] : initial) {
    if (target.at(c) != id) removals[{-c.y, id}].push_back(c);
  }
  for (const auto& [c, id] : target) {
    if (initial.at(c) != id) placements[{c.y, id}].push_back(c);
  }
  std::vector<std::string> out;
  for (const auto& [key, cells] : removals) out.push_back(format_command({CommandOp::Remove, key.second, cells}, palette));
  for (const auto& [key, cells] : placements) out.push_back(format_command({CommandOp::Put, key.second, cells}, palette));
  return out;
}

TapeReplayPolicy::TapeReplayPolicy(const tape::Tape& t) {
  for (const auto& e : t.events) {
    if (const auto* a = std::get_if<tape::ActionEvent>(&e.kind)) {
      if (auto action = tape::to_build_action(*a)) actions_.push_back(*action);
    } else if (const auto* l = std::get_if<tape::SetLookEvent>(&e.kind)) {
      actions_.push_back(SetLook{l->pitch, l->yaw});
    }
  }
}

AgentDecision TapeReplayPolicy::operator()(const AgentObservation& obs) {
  const std::size_t n = std::min(remaining(), obs.step_budget_remaining);
  AgentDecision d;
  d.actions.assign(actions_.begin() + static_cast<std::ptrdiff_t>(next_),
                   actions_.begin() + static_cast<std::ptrdiff_t>(next_ + n));
  next_ += n;
  return d;
}

// ---------------------------------------------------------------------------
// Builder connection

struct AgentConnection::Impl {
  struct Live {
    std::string id;
    WorldState start;
    WorldState world;
    std::vector<ChatMessage> chat;
    session::Phase phase = session::Phase::Created;
    std::uint64_t last_seq = 0;
    std::size_t turn_index = 0;
    std::size_t budget = 250;
    std::size_t steps = 0;
    bool turn_pending = false;
  };

  std::unique_ptr<net::LineStream> stream;
  std::chrono::milliseconds server_heartbeat{10'000};
  std::optional<Live> live;
  WorldState last_world;
  std::uint64_t next_ref = 1;
  bool resyncing = false;
  bool suppress_turns = false;
  RunStats stats;

  void on_message(const json& m) {
    if (protocol::is_event_message(m)) {
      on_event(protocol::game_event_from_json(m));
      return;
    }
    const std::string type = m.value("type", "");
    if (type == "session_start") {
      Live l;
      l.id = m.at("sessionId").get<std::string>();
      l.start = protocol::world_from_json(m.at("world"));
      l.world = l.start;
      l.budget = m.value("stepBudget", std::size_t{250});
      live = std::move(l);
    } else if (type == "session_end") {
      if (live && live->id == m.value("sessionId", "")) {
        last_world = live->world;
        live.reset();
        ++stats.sessions;
      }
    } else if (type == "resync_done") {
      resyncing = false;
    }
  }

  void on_event(const GameEvent& e) {
    if (!live || e.session_id != live->id || e.seq <= live->last_seq) return;
    if (e.seq > live->last_seq + 1) {
      if (!resyncing) request_resync(live->last_seq);
      return;
    }
    live->last_seq = e.seq;
    if (const auto* c = std::get_if<ChatMessage>(&e.kind)) live->chat.push_back(*c);
    try {
      session::apply_event(live->world, e.kind);
    } catch (const VoxelError&) {
      // The mirror disagrees with the server's accepted history.
      full_resync_request();
      return;
    }
    const bool builder_step =
        std::holds_alternative<protocol::BlockPlaced>(e.kind) || std::holds_alternative<protocol::BlockRemoved>(e.kind) ||
        (std::holds_alternative<protocol::PlayerMove>(e.kind) &&
         std::get<protocol::PlayerMove>(e.kind).role == PlayerRole::Builder);
    if (builder_step) ++live->steps;
    if (std::holds_alternative<protocol::PlayerJoined>(e.kind)) {
      if (e.seq == 2) live->phase = session::Phase::ArchitectTurn;
    } else if (const auto* t = std::get_if<protocol::TurnEnded>(&e.kind)) {
      if (t->role == PlayerRole::Architect) {
        live->phase = session::Phase::BuilderTurn;
        ++live->turn_index;
        live->steps = 0;
        live->turn_pending = !suppress_turns;
      } else {
        live->phase = session::Phase::ArchitectTurn;
        live->turn_pending = false;
      }
    } else if (std::holds_alternative<protocol::GameEnded>(e.kind)) {
      live->phase = session::Phase::Ended;
      live->turn_pending = false;
    }
  }

  std::uint64_t request_resync(std::uint64_t from) {
    const auto ref = next_ref++;
    resyncing = true;
    stream->send({{"type", "resync"}, {"sessionId", live->id}, {"fromSeq", from}, {"ref", ref}});
    return ref;
  }

  /// Rebuilds the mirror from the start of the session.
  std::uint64_t full_resync_request() {
    live->world = live->start;
    live->chat.clear();
    live->last_seq = 0;
    live->turn_index = 0;
    live->steps = 0;
    live->phase = session::Phase::Created;
    return request_resync(0);
  }

  json await_reply(std::uint64_t ref, std::chrono::milliseconds timeout) {
    const auto deadline = steady::now() + timeout;
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - steady::now());
      if (left.count() <= 0) throw Rejected("Timeout", "no reply from server");
      auto m = stream->receive(std::min(left, kPoll));
      if (!m) continue;
      const bool reply = m->contains("ref") && m->at("ref") == ref;
      on_message(*m);
      if (reply) return *m;
    }
  }

  std::uint64_t submit(const protocol::EventKind& event, std::chrono::milliseconds timeout) {
    const auto ref = next_ref++;
    stream->send({{"type", "submit"}, {"sessionId", live->id}, {"event", protocol::to_json(event)}, {"ref", ref}});
    const json reply = await_reply(ref, timeout);
    if (reply.value("type", "") == "reject") {
      ++stats.rejections;
      throw Rejected(reply.value("code", "Unknown"), reply.value("detail", ""));
    }
    return reply.value("seq", std::uint64_t{0});
  }

  void full_resync(std::chrono::milliseconds timeout) {
    ++stats.resyncs;
    suppress_turns = true;
    const auto ref = full_resync_request();
    try {
      await_reply(ref, timeout);
    } catch (...) {
      suppress_turns = false;
      throw;
    }
    suppress_turns = false;
  }

  bool builder_turn() const { return live && live->phase == session::Phase::BuilderTurn; }

  void end_turn(std::chrono::milliseconds timeout) {
    if (!builder_turn()) return;
    try {
      submit(protocol::TurnEnded{PlayerRole::Builder}, timeout);
    } catch (const Rejected&) {
    }
  }

  void serve_turn(const Policy& policy, const RunOptions& options) {
    ++stats.turns;
    std::size_t resyncs = 0;
    while (builder_turn()) {
      const std::size_t remaining = live->budget > live->steps ? live->budget - live->steps : 0;
      if (remaining == 0) return;
      const AgentObservation obs{live->world, live->chat, live->turn_index, remaining};
      AgentDecision decision = policy(obs);
      if (decision.actions.size() > remaining) decision.actions.resize(remaining);

      bool desync = false;
      try {
        WorldState predicted = live->world;
        for (const auto& action : decision.actions) {
          WorldState next;
          try {
            next = apply_action(predicted, action);
          } catch (const VoxelError&) {
            break;  // the policy's plan is illegal locally; stop executing it
          }
          try {
            submit(to_event(action, next), options.reply_timeout);
          } catch (const Rejected& r) {
            if (r.code() == "RuleViolation") throw DesyncError(r.what());
            return;
          }
          ++stats.actions_sent;
          if (!builder_turn()) return;  // budget exhausted on the server
          if (!same_world(live->world, next)) throw DesyncError("mirror disagrees after an acknowledged action");
          predicted = next;
        }
      } catch (const DesyncError&) {
        desync = true;
      }
      if (desync) {
        full_resync(options.reply_timeout);
        if (++resyncs > options.max_resyncs) {
          end_turn(options.reply_timeout);
          return;
        }
        continue;
      }
      if (decision.chat && builder_turn()) {
        try {
          submit(ChatMessage{PlayerRole::Builder, *decision.chat}, options.reply_timeout);
        } catch (const Rejected&) {
        }
      }
      if (decision.end_turn || decision.actions.empty()) {
        end_turn(options.reply_timeout);
        return;
      }
    }
  }
};

AgentConnection::AgentConnection(std::string agent_id, std::unique_ptr<Impl> impl)
    : agent_id_(std::move(agent_id)), impl_(std::move(impl)) {}

AgentConnection::~AgentConnection() { close(); }

std::unique_ptr<AgentConnection> AgentConnection::connect(const std::string& host, std::uint16_t port,
                                                          const std::string& agent_id) {
  auto impl = std::make_unique<Impl>();
  impl->stream = open_stream(host, port);
  try {
    impl->stream->send({{"type", "hello"}, {"role", "agent"}, {"agentId", agent_id}});
    const json reply = receive_handshake(*impl->stream);
    if (reply.value("type", "") != "welcome") {
      const std::string code = reply.value("code", "");
      throw ConnectError(code == "DuplicateAgentId" ? ConnectError::Kind::DuplicateAgentId : ConnectError::Kind::Protocol,
                         code + ": " + reply.value("detail", ""));
    }
    impl->server_heartbeat = heartbeat_from(reply);
  } catch (const net::NetError& e) {
    throw ConnectError(ConnectError::Kind::Protocol, e.what());
  }
  return std::unique_ptr<AgentConnection>(new AgentConnection(agent_id, std::move(impl)));
}

const WorldState& AgentConnection::world() const noexcept {
  return impl_->live ? impl_->live->world : impl_->last_world;
}

RunStats AgentConnection::run(const Policy& policy, const RunOptions& options) {
  auto& impl = *impl_;
  std::mutex mutex;
  std::condition_variable wake;
  bool done = false;
  const auto interval = std::min(options.heartbeat, impl.server_heartbeat);
  std::thread heartbeat([&] {
    std::unique_lock lock(mutex);
    while (!wake.wait_for(lock, interval, [&] { return done; })) {
      try {
        impl.stream->send({{"type", "ping"}});
      } catch (const net::NetError&) {
        return;
      }
    }
  });

  try {
    for (;;) {
      if (options.stop && options.stop->load()) break;
      if (options.max_sessions != 0 && impl.stats.sessions >= options.max_sessions) break;
      auto m = impl.stream->receive(kPoll);
      if (m) impl.on_message(*m);
      if (impl.live && impl.live->turn_pending && impl.builder_turn()) {
        impl.live->turn_pending = false;
        impl.serve_turn(policy, options);
      }
    }
  } catch (const net::NetError&) {
    // Connection closed by the server.
  } catch (const Rejected&) {
    // Reply timeout: the connection is unusable.
  }

  {
    std::lock_guard lock(mutex);
    done = true;
  }
  wake.notify_all();
  heartbeat.join();
  return impl.stats;
}

void AgentConnection::close() {
  if (impl_ && impl_->stream) {
    try {
      impl_->stream->send({{"type", "bye"}});
    } catch (const net::NetError&) {
    }
    impl_->stream->close();
  }
}

// ---------------------------------------------------------------------------
// Architect client

struct ArchitectClient::Impl {
  std::unique_ptr<net::LineStream> stream;
  std::chrono::milliseconds heartbeat{10'000};
  steady::time_point last_send = steady::now();
  std::string session_id;
  session::Task task;
  WorldState world;
  std::vector<GameEvent> events;
  std::optional<std::string> completion_code;
  std::uint64_t next_ref = 1;
  std::chrono::milliseconds reply_timeout{10'000};

  void send(const json& m) {
    stream->send(m);
    last_send = steady::now();
  }

  void on_message(const json& m) {
    if (protocol::is_event_message(m)) {
      auto e = protocol::game_event_from_json(m);
      if (e.session_id != session_id || e.seq != events.size() + 1) return;
      session::apply_event(world, e.kind);
      events.push_back(std::move(e));
      return;
    }
    const std::string type = m.value("type", "");
    if (type == "joined") {
      session_id = m.at("sessionId").get<std::string>();
      task = session::task_from_json(m.at("task"));
      world = protocol::world_from_json(m.at("world"));
      events.clear();
    } else if (type == "completion") {
      completion_code = m.value("code", "");
    }
  }

  /// Next message within the deadline, pinging when idle.
  std::optional<json> pump(steady::time_point deadline) {
    if (steady::now() - last_send > heartbeat / 2) send({{"type", "ping"}});
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - steady::now());
    if (left.count() <= 0) throw Rejected("Timeout", "no reply from server");
    auto m = stream->receive(std::min(left, kPoll));
    if (m) on_message(*m);
    return m;
  }

  json await_reply(std::uint64_t ref) {
    const auto deadline = steady::now() + reply_timeout;
    for (;;) {
      auto m = pump(deadline);
      if (m && m->contains("ref") && m->at("ref") == ref) return *m;
    }
  }
};

ArchitectClient::ArchitectClient(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
ArchitectClient::~ArchitectClient() { close(); }

std::unique_ptr<ArchitectClient> ArchitectClient::connect(const std::string& host, std::uint16_t port,
                                                          const std::string& human_id) {
  auto impl = std::make_unique<Impl>();
  impl->stream = open_stream(host, port);
  try {
    impl->send({{"type", "hello"}, {"role", "human"}, {"humanId", human_id}});
    const json reply = receive_handshake(*impl->stream);
    if (reply.value("type", "") != "welcome") {
      throw ConnectError(ConnectError::Kind::Protocol, reply.value("detail", "hello rejected"));
    }
    impl->heartbeat = heartbeat_from(reply);
  } catch (const net::NetError& e) {
    throw ConnectError(ConnectError::Kind::Protocol, e.what());
  }
  return std::unique_ptr<ArchitectClient>(new ArchitectClient(std::move(impl)));
}

std::string ArchitectClient::join(const std::string& code) {
  const auto ref = impl_->next_ref++;
  impl_->session_id.clear();
  impl_->send({{"type", "join"}, {"code", code}, {"ref", ref}});
  const auto deadline = steady::now() + impl_->reply_timeout;
  for (;;) {
    auto m = impl_->pump(deadline);
    if (!m) continue;
    if (m->value("type", "") == "joined") return impl_->session_id;
    if (m->value("type", "") == "reject" && m->contains("ref") && m->at("ref") == ref) {
      throw Rejected(m->value("code", "Unknown"), m->value("detail", ""));
    }
  }
}

std::uint64_t ArchitectClient::submit(const protocol::EventKind& event) {
  const auto ref = impl_->next_ref++;
  impl_->send({{"type", "submit"}, {"sessionId", impl_->session_id}, {"event", protocol::to_json(event)}, {"ref", ref}});
  const json reply = impl_->await_reply(ref);
  if (reply.value("type", "") == "reject") throw Rejected(reply.value("code", "Unknown"), reply.value("detail", ""));
  if (reply.contains("completionCode")) impl_->completion_code = reply.at("completionCode").get<std::string>();
  return reply.value("seq", std::uint64_t{0});
}

void ArchitectClient::say(const std::string& text) { submit(ChatMessage{PlayerRole::Architect, text}); }

void ArchitectClient::end_turn() { submit(protocol::TurnEnded{PlayerRole::Architect}); }

std::string ArchitectClient::end_game(bool success) {
  submit(protocol::GameEnded{success, PlayerRole::Architect});
  return impl_->completion_code.value_or("");
}

BuilderTurn ArchitectClient::wait_for_builder(std::chrono::milliseconds timeout) {
  const auto deadline = steady::now() + timeout;
  for (;;) {
    const auto& events = impl_->events;
    // The builder's turn starts after the architect's latest TurnEnded.
    std::size_t from = 0;
    for (std::size_t i = events.size(); i-- > 0;) {
      const auto* t = std::get_if<protocol::TurnEnded>(&events[i].kind);
      if (t && t->role == PlayerRole::Architect) {
        from = i + 1;
        break;
      }
    }
    BuilderTurn turn;
    for (std::size_t i = from; i < events.size(); ++i) {
      const auto& k = events[i].kind;
      if (const auto* c = std::get_if<ChatMessage>(&k); c && c->role == PlayerRole::Builder) {
        turn.messages.push_back(c->text);
      }
      const auto* t = std::get_if<protocol::TurnEnded>(&k);
      const bool ended = std::holds_alternative<protocol::GameEnded>(k);
      if ((t && t->role == PlayerRole::Builder) || ended) {
        turn.game_ended = ended;
        return turn;
      }
    }
    impl_->pump(deadline);
  }
}

const std::string& ArchitectClient::session_id() const noexcept { return impl_->session_id; }
const session::Task& ArchitectClient::task() const noexcept { return impl_->task; }
const WorldState& ArchitectClient::world() const noexcept { return impl_->world; }
const std::vector<GameEvent>& ArchitectClient::events() const noexcept { return impl_->events; }
std::optional<std::string> ArchitectClient::completion_code() const { return impl_->completion_code; }

void ArchitectClient::close() {
  if (impl_ && impl_->stream) {
    try {
      impl_->stream->send({{"type", "bye"}});
    } catch (const net::NetError&) {
    }
    impl_->stream->close();
  }
}

ScriptedResult run_scripted_architect(ArchitectClient& client, const std::string& join_code,
                                      const std::vector<std::string>& instructions,
                                      std::chrono::milliseconds turn_timeout) {
  ScriptedResult r;
  r.session_id = client.join(join_code);
  bool ended = false;
  for (const auto& instruction : instructions) {
    client.say(instruction);
    client.end_turn();
    const auto turn = client.wait_for_builder(turn_timeout);
    ++r.turns;
    r.questions.insert(r.questions.end(), turn.messages.begin(), turn.messages.end());
    if (turn.game_ended) {
      ended = true;
      break;
    }
  }
  r.success = client.world().grid == client.task().target;
  if (ended) {
    r.success = false;
    r.completion_code = client.completion_code().value_or("");
  } else {
    r.completion_code = client.end_game(r.success);
  }
  r.final_world = client.world();
  return r;
}

}  // namespace iglu::agent
