#pragma once

// Builder-agent toolkit: joins sessions over the wire protocol, mirrors the
// world from the event stream, invokes a policy on every builder turn and
// streams its actions. Also the architect-side client used by scripted
// evaluations, and deterministic reference policies.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "iglu/grid_io.hpp"
#include "iglu/net.hpp"
#include "iglu/protocol.hpp"
#include "iglu/session.hpp"
#include "iglu/tape.hpp"
#include "iglu/voxel.hpp"

namespace iglu::agent {

using protocol::ChatMessage;

struct AgentObservation {
  WorldState world;
  /// Every chat message of the session so far, in order.
  std::vector<ChatMessage> chat_history;
  /// 1 for the first builder turn.
  std::size_t turn_index = 0;
  std::size_t step_budget_remaining = 0;
};

struct AgentDecision {
  std::vector<BuildAction> actions;
  bool end_turn = true;
  /// Sent to the architect after the actions, e.g. a clarifying question.
  std::optional<std::string> chat;
  friend bool operator==(const AgentDecision&, const AgentDecision&) = default;
};

using Policy = std::function<AgentDecision(const AgentObservation&)>;

class ConnectError : public std::runtime_error {
 public:
  enum class Kind { ConnectionRefused, DuplicateAgentId, Protocol };
  ConnectError(Kind kind, const std::string& detail) : std::runtime_error(detail), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// The server rejected an action the local model considered legal.
class DesyncError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A request was rejected by the server.
class Rejected : public std::runtime_error {
 public:
  Rejected(std::string code, const std::string& detail) : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct RunOptions {
  /// Stop after this many finished sessions; 0 runs until stopped.
  std::size_t max_sessions = 0;
  /// Policy re-invocations allowed per turn after a desync.
  std::size_t max_resyncs = 2;
  std::chrono::milliseconds heartbeat{10'000};
  std::chrono::milliseconds reply_timeout{10'000};
  /// Checked between messages; run() returns when it becomes true.
  const std::atomic<bool>* stop = nullptr;
};

struct RunStats {
  std::size_t sessions = 0;
  std::size_t turns = 0;
  std::size_t actions_sent = 0;
  std::size_t rejections = 0;
  std::size_t resyncs = 0;
};

class AgentConnection {
 public:
  /// Registers the agent as idle. Throws ConnectError.
  static std::unique_ptr<AgentConnection> connect(const std::string& host, std::uint16_t port,
                                                  const std::string& agent_id);
  ~AgentConnection();

  const std::string& agent_id() const noexcept { return agent_id_; }

  /// Event loop: serves builder turns with `policy` until stopped, the
  /// session limit is reached or the connection closes.
  RunStats run(const Policy& policy, const RunOptions& options = {});

  /// Local mirror of the current (or last) session's world.
  const WorldState& world() const noexcept;

  void close();

 private:
  struct Impl;
  AgentConnection(std::string agent_id, std::unique_ptr<Impl> impl);
  std::string agent_id_;
  std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Reference policies

AgentDecision noop_policy(const AgentObservation& obs);

/// Replays the action lines of a tape across turns, as many per turn as the
/// budget allows. set_look lines become SetLook actions.
class TapeReplayPolicy {
 public:
  explicit TapeReplayPolicy(const tape::Tape& t);
  AgentDecision operator()(const AgentObservation& obs);
  std::size_t remaining() const noexcept { return actions_.size() - next_; }

 private:
  std::vector<BuildAction> actions_;
  std::size_t next_ = 0;
};

enum class CommandOp { Put, Remove };

struct Command {
  CommandOp op = CommandOp::Put;
  BlockId id = kAir;
  std::vector<Coord> at;
  friend bool operator==(const Command&, const Command&) = default;
};

/// Parses `put|remove <count> <color> block(s) at (x,y,z) [(x,y,z)...]`
/// clauses separated by ';', '.', ',', "and" or "then". Coordinates are
/// absolute build-frame cells. nullopt unless the whole text parses, every
/// count matches its coordinate list, every color is in the palette and every
/// cell is in bounds.
std::optional<std::vector<Command>> parse_command(std::string_view text, const Palette& palette = Palette::defaults());

/// Text in the grammar above for one command.
std::string format_command(const Command& c, const Palette& palette = Palette::defaults());

/// Absolute moves that bring the avatar to a standing spot from which
/// `action` (a PlaceBlock or BreakBlock) is legal, cheapest first with ties
/// broken deterministically. nullopt when more than max_moves are needed.
std::optional<std::vector<BuildAction>> plan_reach(const WorldState& s, const BuildAction& action,
                                                   std::size_t max_moves = 50);

/// Moves plus block actions carrying out `commands` from `s`, or nullopt when
/// some step cannot be planned.
std::optional<std::vector<BuildAction>> plan_commands(const WorldState& s, const std::vector<Command>& commands,
                                                      std::size_t max_moves = 50);

inline constexpr std::string_view kClarifyingQuestion =
    "Which blocks should I put or remove, and where? Please use the form: put 1 red block at (0,0,0).";

/// Deterministic reference builder for the restricted grammar. Reads the
/// latest architect message; anything it cannot parse or plan yields the
/// clarifying question and ends the turn.
AgentDecision grammar_builder(const AgentObservation& obs, const Palette& palette = Palette::defaults());

/// Instructions in the grammar that turn `initial` into `target`: removals
/// first, then placements one color at a time, bottom layer first.
std::vector<std::string> script_instructions(const BlockGrid& initial, const BlockGrid& target,
                                             const Palette& palette = Palette::defaults());

// ---------------------------------------------------------------------------
// Architect side

struct BuilderTurn {
  /// Builder chat messages received during the turn.
  std::vector<std::string> messages;
  bool game_ended = false;
};

class ArchitectClient {
 public:
  /// Throws ConnectError.
  static std::unique_ptr<ArchitectClient> connect(const std::string& host, std::uint16_t port,
                                                  const std::string& human_id);
  ~ArchitectClient();

  /// Joins with a code; returns the session id. Throws Rejected.
  std::string join(const std::string& code);
  /// Sends an event and waits for its ack; returns the seq. Throws Rejected.
  std::uint64_t submit(const protocol::EventKind& event);

  void say(const std::string& text);
  void end_turn();
  /// Returns the completion code.
  std::string end_game(bool success);
  /// Blocks until the builder ends its turn or the game ends.
  BuilderTurn wait_for_builder(std::chrono::milliseconds timeout);

  const std::string& session_id() const noexcept;
  const session::Task& task() const noexcept;
  const WorldState& world() const noexcept;
  const std::vector<protocol::GameEvent>& events() const noexcept;
  std::optional<std::string> completion_code() const;

  void close();

 private:
  struct Impl;
  explicit ArchitectClient(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

struct ScriptedResult {
  std::string session_id;
  std::string completion_code;
  bool success = false;
  WorldState final_world;
  std::vector<std::string> questions;
  std::size_t turns = 0;
};

/// Plays the architect: one instruction per turn, then ends the game with
/// success iff the grid equals the task target.
ScriptedResult run_scripted_architect(ArchitectClient& client, const std::string& join_code,
                                      const std::vector<std::string>& instructions,
                                      std::chrono::milliseconds turn_timeout = std::chrono::seconds(10));

}  // namespace iglu::agent
