#include "iglu/session.hpp"

#include <cmath>
#include <utility>

#include "iglu/grid_io.hpp"

namespace iglu::session {

namespace {

using namespace protocol;

constexpr double kHeightTolerance = 1e-6;

std::optional<PlayerRole> role_field(const EventKind& kind) {
  return std::visit(
      [](const auto& e) -> std::optional<PlayerRole> {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, GameEnded>) {
          return e.reporter;
        } else if constexpr (requires { e.role; }) {
          return e.role;
        } else {
          return std::nullopt;
        }
      },
      kind);
}

Phase turn_phase(PlayerRole r) { return r == PlayerRole::Architect ? Phase::ArchitectTurn : Phase::BuilderTurn; }

// Phase bookkeeping shared by live sessions and audits.
struct PhaseMachine {
  Phase phase = Phase::Created;
  bool architect_joined = false;
  bool builder_joined = false;

  std::optional<SessionErrc> check(PlayerRole sender, const EventKind& kind) const {
    if (auto err = gate(phase, sender, kind)) return err;
    if (const auto* j = std::get_if<PlayerJoined>(&kind)) {
      if ((j->role == PlayerRole::Architect && architect_joined) || (j->role == PlayerRole::Builder && builder_joined)) {
        return SessionErrc::InvalidEvent;
      }
    }
    return std::nullopt;
  }

  void advance(const EventKind& kind) {
    if (const auto* j = std::get_if<PlayerJoined>(&kind)) {
      (j->role == PlayerRole::Architect ? architect_joined : builder_joined) = true;
      if (architect_joined && builder_joined) phase = Phase::ArchitectTurn;
    } else if (const auto* t = std::get_if<TurnEnded>(&kind)) {
      phase = t->role == PlayerRole::Architect ? Phase::BuilderTurn : Phase::ArchitectTurn;
    } else if (std::holds_alternative<GameEnded>(kind)) {
      phase = Phase::Ended;
    }
  }
};

bool is_builder_step(const EventKind& kind) {
  if (const auto* m = std::get_if<PlayerMove>(&kind)) return m->role == PlayerRole::Builder;
  return std::holds_alternative<BlockPlaced>(kind) || std::holds_alternative<BlockRemoved>(kind);
}

}  // namespace

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Created: return "Created";
    case Phase::ArchitectTurn: return "ArchitectTurn";
    case Phase::BuilderTurn: return "BuilderTurn";
    case Phase::Ended: return "Ended";
  }
  return "Ended";
}

void validate_task(const Task& t) {
  if (t.id.empty()) throw std::invalid_argument("task id must not be empty");
  if (t.initial == t.target) throw std::invalid_argument("task '" + t.id + "': target equals initial grid");
}

nlohmann::json to_json(const Task& t) {
  return {{"id", t.id}, {"initial", grid_to_json(t.initial)}, {"target", grid_to_json(t.target)}};
}

Task task_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("task must be an object");
  Task t;
  try {
    t.id = j.at("id").get<std::string>();
    t.initial = j.contains("initial") ? grid_from_json(j.at("initial")) : BlockGrid{};
    t.target = grid_from_json(j.at("target"));
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("malformed task: ") + e.what());
  }
  validate_task(t);
  return t;
}

std::vector<Task> load_tasks(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  const auto& list = j.is_object() && j.contains("tasks") ? j.at("tasks") : j;
  std::vector<Task> out;
  if (!list.is_array()) {
    out.push_back(task_from_json(list));
    return out;
  }
  for (const auto& t : list) out.push_back(task_from_json(t));
  return out;
}

std::string_view to_string(SessionErrc c) {
  switch (c) {
    case SessionErrc::WrongPhase: return "WrongPhase";
    case SessionErrc::RuleViolation: return "RuleViolation";
    case SessionErrc::SessionEnded: return "SessionEnded";
    case SessionErrc::InvalidEvent: return "InvalidEvent";
  }
  return "InvalidEvent";
}

SessionError::SessionError(SessionErrc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

PlayerRole sender_of(const EventKind& kind) { return role_field(kind).value_or(PlayerRole::Builder); }

std::optional<SessionErrc> gate(Phase phase, PlayerRole sender, const EventKind& kind) {
  if (phase == Phase::Ended) return SessionErrc::SessionEnded;
  if (sender_of(kind) != sender) {
    // Block events carry no role: a non-builder posting one is out of turn.
    return role_field(kind) ? SessionErrc::InvalidEvent : SessionErrc::WrongPhase;
  }
  return std::visit(
      [&](const auto& e) -> std::optional<SessionErrc> {
        using T = std::decay_t<decltype(e)>;
        const bool live_turn = phase == Phase::ArchitectTurn || phase == Phase::BuilderTurn;
        bool allowed = false;
        if constexpr (std::is_same_v<T, PlayerJoined>) {
          allowed = phase == Phase::Created && e.role != PlayerRole::System;
        } else if constexpr (std::is_same_v<T, ChatMessage> || std::is_same_v<T, TurnEnded>) {
          allowed = e.role != PlayerRole::System && phase == turn_phase(e.role);
        } else if constexpr (std::is_same_v<T, PlayerMove>) {
          allowed = e.role == PlayerRole::Architect ? live_turn
                                                    : e.role == PlayerRole::Builder && phase == Phase::BuilderTurn;
        } else if constexpr (std::is_same_v<T, BlockPlaced> || std::is_same_v<T, BlockRemoved>) {
          allowed = phase == Phase::BuilderTurn;
        } else if constexpr (std::is_same_v<T, GameEnded>) {
          allowed = e.reporter == PlayerRole::System || (e.reporter == PlayerRole::Architect &&
                                                        phase == Phase::ArchitectTurn);
        }
        return allowed ? std::nullopt : std::optional(SessionErrc::WrongPhase);
      },
      kind);
}

void validate_builder_move(const WorldState& state, const PlayerMove& move) {
  const Vec3& p = move.pos;
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) || !std::isfinite(move.pitch) ||
      !std::isfinite(move.yaw)) {
    throw VoxelError(VoxelErrc::OutOfBounds, "non-finite position or orientation");
  }
  if (std::abs(p.x) > kWalkableHalfWidth || std::abs(p.z) > kWalkableHalfWidth) {
    throw VoxelError(VoxelErrc::OutOfBounds, "position outside the walkable footprint");
  }
  const double ground = settle_height(state.grid, p.x, p.z);
  if (std::abs(p.y - ground) > kHeightTolerance && std::abs(p.y - (ground + 1.0)) > kHeightTolerance) {
    throw VoxelError(VoxelErrc::OutOfBounds, "height is neither standing nor jump height");
  }
}

void apply_event(WorldState& state, const EventKind& kind) {
  if (const auto* m = std::get_if<PlayerMove>(&kind)) {
    if (m->role == PlayerRole::Builder) state.avatar = {m->pos, clamp_pitch(m->pitch), normalize_yaw(m->yaw)};
  } else if (const auto* b = std::get_if<BlockPlaced>(&kind)) {
    state = apply_action(state, PlaceBlock{b->at, b->id});
  } else if (const auto* r = std::get_if<BlockRemoved>(&kind)) {
    state = apply_action(state, BreakBlock{r->at});
  }
}

GameSession::GameSession(std::string id, Task task, SessionConfig config)
    : id_(std::move(id)), task_(std::move(task)), config_(config), world_(spawn_state(task_.initial)) {
  if (config_.step_budget == 0) throw std::invalid_argument("step budget must be positive");
}

GameEvent GameSession::append(EventKind kind) {
  GameEvent e{id_, log_.size() + 1, std::move(kind)};
  log_.push_back(e);
  return e;
}

std::vector<GameEvent> GameSession::start() {
  std::vector<GameEvent> out = post(PlayerRole::Architect, PlayerJoined{PlayerRole::Architect});
  auto more = post(PlayerRole::Builder, PlayerJoined{PlayerRole::Builder});
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

std::vector<GameEvent> GameSession::post(PlayerRole sender, const EventKind& kind) {
  const PhaseMachine machine{phase_, architect_joined_, builder_joined_};
  if (auto err = machine.check(sender, kind)) {
    throw SessionError(*err, std::string(kind_name(kind)) + " from " + std::string(to_string(sender)) + " in " +
                                 std::string(to_string(phase_)));
  }

  WorldState next = world_;
  try {
    if (const auto* m = std::get_if<PlayerMove>(&kind); m && m->role == PlayerRole::Builder) {
      validate_builder_move(world_, *m);
    }
    apply_event(next, kind);
  } catch (const VoxelError& e) {
    throw SessionError(SessionErrc::RuleViolation, e.what());
  }

  std::vector<GameEvent> out;
  out.push_back(append(kind));
  world_ = std::move(next);

  PhaseMachine advanced = machine;
  advanced.advance(kind);
  architect_joined_ = advanced.architect_joined;
  builder_joined_ = advanced.builder_joined;
  if (advanced.phase == Phase::BuilderTurn && phase_ != Phase::BuilderTurn) {
    ++builder_turns_;
    turn_steps_ = 0;
  }
  phase_ = advanced.phase;

  if (const auto* c = std::get_if<ChatMessage>(&kind)) chat_.push_back(*c);
  if (const auto* g = std::get_if<GameEnded>(&kind)) success_ = g->success;

  if (is_builder_step(kind)) {
    ++turn_steps_;
    ++total_steps_;
    if (turn_steps_ >= config_.step_budget) {
      auto forced = post(PlayerRole::Builder, TurnEnded{PlayerRole::Builder});
      out.insert(out.end(), forced.begin(), forced.end());
    }
  }
  return out;
}

std::vector<GameEvent> GameSession::seal(bool success) {
  if (!live()) throw SessionError(SessionErrc::SessionEnded, "session " + id_ + " already ended");
  return post(PlayerRole::System, GameEnded{success, PlayerRole::System});
}

std::optional<std::string> audit_log(std::span<const GameEvent> log) {
  PhaseMachine machine;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const GameEvent& e = log[i];
    const std::string where = "event " + std::to_string(i + 1);
    if (e.seq != i + 1) return where + ": seq " + std::to_string(e.seq) + " breaks the gapless sequence";
    if (e.session_id != log.front().session_id) return where + ": foreign session id " + e.session_id;
    if (auto err = machine.check(sender_of(e.kind), e.kind)) {
      return where + ": " + std::string(to_string(*err)) + " for " + std::string(kind_name(e.kind)) + " in " +
             std::string(to_string(machine.phase));
    }
    machine.advance(e.kind);
  }
  return std::nullopt;
}

WorldState replay_log(const Task& task, std::span<const GameEvent> log) {
  WorldState state = spawn_state(task.initial);
  for (const auto& e : log) apply_event(state, e.kind);
  return state;
}

}  // namespace iglu::session
