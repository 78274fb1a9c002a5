#pragma once

// Session orchestration: agent registry, join and completion codes, live
// sessions, blinded comparisons and the asynchronous collection queue.
//
// Transport-agnostic: connected parties are Endpoints that receive JSON
// messages. Every public member is thread-safe. Event processing is
// serialized per session; different sessions proceed independently.

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "iglu/config.hpp"
#include "iglu/grid_io.hpp"
#include "iglu/metrics.hpp"
#include "iglu/protocol.hpp"
#include "iglu/session.hpp"
#include "iglu/storage.hpp"
#include "iglu/tape.hpp"

namespace iglu::server {

using protocol::PlayerRole;
using session::Phase;
using session::Task;
using Clock = std::function<std::chrono::steady_clock::time_point()>;

enum class ServerErrc {
  UnknownAgent,
  UnknownTask,
  DuplicateAgentId,
  InvalidCode,
  CodeAlreadyUsed,
  AgentUnavailable,
  UnknownSession,
  NotParticipant,
  WrongPhase,
  RuleViolation,
  SessionEnded,
  InvalidEvent,
  SameAgent,
  UnknownComparison,
  VerdictNotReady,
  VerdictAlreadySubmitted,
  CollectionDisabled,
  UnknownLease,
  LeaseExpired,
  MissingQuestion,
  ValidationError,
  InvalidRequest,
};

std::string_view to_string(ServerErrc c);

class ServerError : public std::runtime_error {
 public:
  ServerError(ServerErrc code, const std::string& detail);
  ServerErrc code() const noexcept { return code_; }

 private:
  ServerErrc code_;
};

/// A connected party. send() must not call back into the server.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual void send(const nlohmann::json& message) = 0;
};

/// Hex token with `bytes` bytes of std::random_device entropy.
std::string random_token(std::size_t bytes = 16);

struct PostResult {
  /// Seq assigned to the posted event.
  std::uint64_t seq = 0;
  Phase phase = Phase::Created;
  /// Set when the event ended the session.
  std::optional<std::string> completion_code;
};

struct ComparisonSlot {
  /// "Agent 1" or "Agent 2".
  std::string label;
  std::string agent_id;
  std::string join_code;
  std::optional<std::string> session_id;
  bool finished = false;
};

struct ComparisonAssignment {
  std::string hit_id;
  std::string task_id;
  std::array<ComparisonSlot, 2> slots;
  /// 1 or 2 once the verdict is in.
  std::optional<int> verdict;
  std::array<std::string, 2> feedback;
};

/// Organizer view including the real agent ids.
nlohmann::json to_json(const ComparisonAssignment& c);

struct TurnAssignment {
  std::int64_t game_id = 0;
  std::int64_t step_id = 0;
  PlayerRole role = PlayerRole::Architect;
  std::string lease_id;
  std::chrono::steady_clock::time_point deadline;
  WorldState start;
  /// Target structure, shown to architects only.
  std::optional<BlockGrid> target;
  /// Instruction to execute, for builder turns.
  std::optional<std::string> instruction;
};

nlohmann::json to_json(const TurnAssignment& a, std::chrono::steady_clock::time_point now);

struct TurnSubmission {
  std::optional<tape::Tape> tape;
  std::optional<BlockGrid> ending_state;
  std::optional<std::string> instruction;
  bool ambiguous = false;
  std::optional<std::string> question;
};

/// Parses {"tape": [...], "endingState": [...], "instruction", "ambiguous",
/// "clarificationQuestion"}. Throws ServerError(InvalidRequest).
TurnSubmission turn_submission_from_json(const nlohmann::json& j);

class GameServer {
 public:
  GameServer(ServerConfig config, std::shared_ptr<Storage> storage, Clock clock = std::chrono::steady_clock::now);
  GameServer(const GameServer&) = delete;
  GameServer& operator=(const GameServer&) = delete;

  const ServerConfig& config() const noexcept { return config_; }
  Storage& storage() noexcept { return *storage_; }

  // Agents ------------------------------------------------------------------
  /// Throws DuplicateAgentId while another connection holds the id.
  void register_agent(const std::string& agent_id, std::shared_ptr<Endpoint> endpoint);
  /// A live session of the agent is sealed with success=false.
  void unregister_agent(const std::string& agent_id);
  std::vector<std::string> agents() const;
  bool agent_busy(const std::string& agent_id) const;

  // Tasks -------------------------------------------------------------------
  /// Replaces a task with the same id. Throws InvalidRequest on invalid tasks.
  void add_task(Task task);
  std::optional<Task> task(const std::string& task_id) const;
  std::vector<Task> tasks() const;

  // Games -------------------------------------------------------------------
  std::string mint_join_code(const std::string& agent_id, const std::string& task_id);

  /// Starts the session: the human receives "joined", the agent
  /// "session_start", then both receive the PlayerJoined events.
  std::string join_game(const std::string& code, const std::string& human_id, std::shared_ptr<Endpoint> human);

  /// Re-attaches a human to their live session and resends "joined".
  void resume_game(const std::string& session_id, const std::string& human_id, std::shared_ptr<Endpoint> human);

  /// `participant_id` must be the human id for the architect and the agent id
  /// for the builder.
  PostResult post_event(const std::string& session_id, PlayerRole role, const std::string& participant_id,
                        const protocol::EventKind& kind);
  Phase end_turn(const std::string& session_id, PlayerRole role, const std::string& participant_id);
  std::string end_game(const std::string& session_id, const std::string& human_id, bool success);

  /// Starts the disconnect grace period of the session's human.
  void human_disconnected(const std::string& session_id, const std::string& human_id);

  /// Events with seq > after_seq, for resync.
  std::vector<protocol::GameEvent> events_since(const std::string& session_id, std::uint64_t after_seq) const;

  std::optional<Phase> phase(const std::string& session_id) const;
  std::optional<WorldState> world(const std::string& session_id) const;

  /// {"summary": games-table row, "task", "events": [...]}.
  std::optional<nlohmann::json> log_by_completion_code(const std::string& code) const;

  // Comparisons ---------------------------------------------------------------
  /// Slot order is drawn from a generator seeded with `seed`, or with the
  /// next value of the server generator (itself seeded from config.seed).
  ComparisonAssignment create_comparison(const std::string& task_id, const std::string& agent_x,
                                         const std::string& agent_y, std::optional<std::uint64_t> seed = {});
  std::optional<ComparisonAssignment> comparison(const std::string& hit_id) const;
  /// Blinded view: labels, join codes and progress; never agent ids.
  nlohmann::json participant_view(const std::string& hit_id) const;
  /// winner_slot is 1 or 2. Requires both games ended.
  metrics::GameOutcome submit_verdict(const std::string& hit_id, int winner_slot,
                                      const std::array<std::string, 2>& feedback = {});
  std::vector<metrics::GameOutcome> outcomes() const;

  // Collection mode -----------------------------------------------------------
  /// New collection game seeded with the task's initial grid and target.
  std::int64_t open_collection_game(const std::string& task_id);
  std::optional<TurnAssignment> next_open_turn(const std::string& annotator_id);
  /// Returns the ids of the stored records.
  std::vector<std::string> submit_single_turn(const std::string& lease_id, const TurnSubmission& submission);

  // Maintenance ---------------------------------------------------------------
  /// Seals sessions over the wall-clock cap or past the disconnect grace and
  /// releases expired leases. Returns the number of sessions sealed.
  std::size_t tick();
  /// Seals every live session with success=false.
  std::size_t shutdown();

  nlohmann::json stats() const;

 private:
  struct Slot;
  struct AgentEntry {
    std::shared_ptr<Endpoint> endpoint;
    std::optional<std::string> live_session;
  };
  struct CodeEntry {
    std::string agent_id;
    std::string task_id;
    std::chrono::steady_clock::time_point minted;
    bool used = false;
    std::optional<std::pair<std::string, int>> comparison;
  };
  struct CollectionGame;

  std::shared_ptr<Slot> find_slot(const std::string& session_id) const;
  std::string mint_code_locked(const std::string& agent_id, const std::string& task_id);
  PostResult post_locked(Slot& slot, PlayerRole role, const protocol::EventKind& kind);
  void deliver_locked(Slot& slot, const std::vector<protocol::GameEvent>& events);
  std::string finalize_locked(Slot& slot);
  bool seal_slot(const std::shared_ptr<Slot>& slot);
  nlohmann::json joined_message(const Slot& slot) const;
  void expire_leases_locked(std::chrono::steady_clock::time_point now);

  ServerConfig config_;
  std::shared_ptr<Storage> storage_;
  Clock clock_;
  Palette palette_ = Palette::defaults();

  mutable std::mutex mutex_;
  std::mt19937_64 rng_;
  std::map<std::string, AgentEntry> agents_;
  std::map<std::string, Task> tasks_;
  std::map<std::string, CodeEntry> codes_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::map<std::string, std::string> completion_codes_;
  std::map<std::string, ComparisonAssignment> comparisons_;
  std::uint64_t next_hit_ = 1;
  std::map<std::int64_t, std::shared_ptr<CollectionGame>> collection_;
  std::map<std::string, std::int64_t> leases_;
  std::int64_t next_collection_game_ = 1;
};

}  // namespace iglu::server
