#pragma once

// Turn-based architect/builder game state machine. A session is an
// append-only event log; world state is whatever voxel-core makes of it.
//
//   Created -> ArchitectTurn <-> BuilderTurn -> Ended
//
// Not thread-safe; the server serializes access per session.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "iglu/protocol.hpp"
#include "iglu/voxel.hpp"

namespace iglu::session {

using protocol::EventKind;
using protocol::GameEvent;
using protocol::PlayerRole;

enum class Phase { Created, ArchitectTurn, BuilderTurn, Ended };
std::string_view to_string(Phase p);

struct Task {
  std::string id;
  BlockGrid initial;
  BlockGrid target;
  friend bool operator==(const Task&, const Task&) = default;
};

/// Throws std::invalid_argument when the id is empty or target == initial.
void validate_task(const Task& t);
/// {"id", "initial": [[x,y,z,id]...], "target": [...]} in the world frame.
nlohmann::json to_json(const Task& t);
Task task_from_json(const nlohmann::json& j);
/// A task object, an array of tasks, or {"tasks": [...]}. Throws
/// std::invalid_argument; unreadable files throw std::runtime_error.
std::vector<Task> load_tasks(const std::filesystem::path& path);

enum class SessionErrc { WrongPhase, RuleViolation, SessionEnded, InvalidEvent };
std::string_view to_string(SessionErrc c);

class SessionError : public std::runtime_error {
 public:
  SessionError(SessionErrc code, const std::string& detail);
  SessionErrc code() const noexcept { return code_; }

 private:
  SessionErrc code_;
};

/// Phase gating shared by live sessions and log audits. Returns the error a
/// sender would get for posting `kind` in `phase`, or nullopt if allowed.
std::optional<SessionErrc> gate(Phase phase, PlayerRole sender, const EventKind& kind);

/// Role an event is attributed to. BlockPlaced and BlockRemoved belong to the
/// builder.
PlayerRole sender_of(const EventKind& kind);

/// Applies a builder-visible event through voxel-core. PlayerMove of the
/// builder replaces the avatar; block events run as place/remove actions (so
/// the avatar settles afterwards). Throws VoxelError.
void apply_event(WorldState& state, const EventKind& kind);

/// Throws VoxelError(OutOfBounds) when a builder position is off the walkable
/// footprint or not at standing or jump height.
void validate_builder_move(const WorldState& state, const protocol::PlayerMove& move);

struct SessionConfig {
  std::size_t step_budget = 250;
};

class GameSession {
 public:
  GameSession(std::string id, Task task, SessionConfig config = {});

  const std::string& id() const noexcept { return id_; }
  const Task& task() const noexcept { return task_; }
  Phase phase() const noexcept { return phase_; }
  bool live() const noexcept { return phase_ != Phase::Ended; }
  /// Set once the session has ended.
  std::optional<bool> success() const noexcept { return success_; }
  const WorldState& world() const noexcept { return world_; }
  const std::vector<protocol::ChatMessage>& chat_history() const noexcept { return chat_; }
  const std::vector<GameEvent>& log() const noexcept { return log_; }
  std::size_t step_budget() const noexcept { return config_.step_budget; }
  std::size_t steps_this_turn() const noexcept { return turn_steps_; }
  std::size_t total_builder_steps() const noexcept { return total_steps_; }
  /// Builder turns begun so far; the first builder turn has index 1.
  std::size_t builder_turn_index() const noexcept { return builder_turns_; }

  /// Posts PlayerJoined for both roles; the session enters ArchitectTurn.
  std::vector<GameEvent> start();

  /// Validates and appends one event. Returns everything appended, which
  /// includes a forced TurnEnded when the builder exhausts its step budget.
  /// Throws SessionError; a rejected event leaves the session unchanged.
  std::vector<GameEvent> post(PlayerRole sender, const EventKind& kind);

  /// Server-side termination from any live phase.
  std::vector<GameEvent> seal(bool success);

 private:
  GameEvent append(EventKind kind);

  std::string id_;
  Task task_;
  SessionConfig config_;
  Phase phase_ = Phase::Created;
  bool architect_joined_ = false;
  bool builder_joined_ = false;
  std::optional<bool> success_;
  WorldState world_;
  std::vector<protocol::ChatMessage> chat_;
  std::vector<GameEvent> log_;
  std::size_t turn_steps_ = 0;
  std::size_t total_steps_ = 0;
  std::size_t builder_turns_ = 0;
};

/// First violation of the log invariants: seq gapless from 1, one session id,
/// phase gating, nothing after GameEnded. nullopt when the log is sound.
std::optional<std::string> audit_log(std::span<const GameEvent> log);

/// World state reached by replaying a log from the task's initial grid.
/// Throws VoxelError if the log contains an illegal builder action.
WorldState replay_log(const Task& task, std::span<const GameEvent> log);

}  // namespace iglu::session
