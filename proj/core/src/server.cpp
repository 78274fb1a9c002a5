#include "iglu/server.hpp"

#include <algorithm>
#include <cstdio>

#include "iglu/dataset.hpp"
#include "iglu/grid_io.hpp"

namespace iglu::server {

namespace {

using nlohmann::json;
using protocol::GameEvent;
using steady = std::chrono::steady_clock;

ServerErrc from_session(session::SessionErrc c) {
  switch (c) {
    case session::SessionErrc::WrongPhase: return ServerErrc::WrongPhase;
    case session::SessionErrc::RuleViolation: return ServerErrc::RuleViolation;
    case session::SessionErrc::SessionEnded: return ServerErrc::SessionEnded;
    case session::SessionErrc::InvalidEvent: return ServerErrc::InvalidEvent;
  }
  return ServerErrc::InvalidEvent;
}

void send_quietly(const std::shared_ptr<Endpoint>& endpoint, const json& message) {
  if (!endpoint) return;
  try {
    endpoint->send(message);
  } catch (const std::exception&) {
    // A dead connection is noticed by its reader; the session log is unaffected.
  }
}

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::string padded(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04llu", static_cast<unsigned long long>(n));
  return buf;
}

}  // namespace

std::string_view to_string(ServerErrc c) {
  switch (c) {
    case ServerErrc::UnknownAgent: return "UnknownAgent";
    case ServerErrc::UnknownTask: return "UnknownTask";
    case ServerErrc::DuplicateAgentId: return "DuplicateAgentId";
    case ServerErrc::InvalidCode: return "InvalidCode";
    case ServerErrc::CodeAlreadyUsed: return "CodeAlreadyUsed";
    case ServerErrc::AgentUnavailable: return "AgentUnavailable";
    case ServerErrc::UnknownSession: return "UnknownSession";
    case ServerErrc::NotParticipant: return "NotParticipant";
    case ServerErrc::WrongPhase: return "WrongPhase";
    case ServerErrc::RuleViolation: return "RuleViolation";
    case ServerErrc::SessionEnded: return "SessionEnded";
    case ServerErrc::InvalidEvent: return "InvalidEvent";
    case ServerErrc::SameAgent: return "SameAgent";
    case ServerErrc::UnknownComparison: return "UnknownComparison";
    case ServerErrc::VerdictNotReady: return "VerdictNotReady";
    case ServerErrc::VerdictAlreadySubmitted: return "VerdictAlreadySubmitted";
    case ServerErrc::CollectionDisabled: return "CollectionDisabled";
    case ServerErrc::UnknownLease: return "UnknownLease";
    case ServerErrc::LeaseExpired: return "LeaseExpired";
    case ServerErrc::MissingQuestion: return "MissingQuestion";
    case ServerErrc::ValidationError: return "ValidationError";
    case ServerErrc::InvalidRequest: return "InvalidRequest";
  }
  return "InvalidRequest";
}

ServerError::ServerError(ServerErrc code, const std::string& detail)
    : std::runtime_error(detail), code_(code) {}

std::string random_token(std::size_t bytes) {
  static std::mutex mutex;
  static std::random_device device;
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes * 2);
  std::lock_guard lock(mutex);
  for (std::size_t i = 0; i < bytes; i += 4) {
    std::uint32_t word = device();
    for (std::size_t k = 0; k < 4 && i + k < bytes; ++k, word >>= 8) {
      out += kHex[(word >> 4) & 0xf];
      out += kHex[word & 0xf];
    }
  }
  return out;
}

json to_json(const ComparisonAssignment& c) {
  json slots = json::array();
  for (const auto& s : c.slots) {
    slots.push_back({{"label", s.label},
                     {"agentId", s.agent_id},
                     {"joinCode", s.join_code},
                     {"sessionId", s.session_id ? json(*s.session_id) : json(nullptr)},
                     {"finished", s.finished}});
  }
  return {{"hitId", c.hit_id},
          {"taskId", c.task_id},
          {"slots", slots},
          {"verdict", c.verdict ? json(*c.verdict) : json(nullptr)},
          {"feedback", c.feedback}};
}

json to_json(const TurnAssignment& a, steady::time_point now) {
  json j{{"gameId", a.game_id},
         {"stepId", a.step_id},
         {"role", std::string(protocol::to_string(a.role))},
         {"leaseId", a.lease_id},
         {"expiresInSeconds", std::chrono::duration_cast<std::chrono::seconds>(a.deadline - now).count()},
         {"world", protocol::world_to_json(a.start)}};
  if (a.target) j["target"] = grid_to_json(*a.target);
  if (a.instruction) j["instruction"] = *a.instruction;
  return j;
}

TurnSubmission turn_submission_from_json(const json& j) {
  if (!j.is_object()) throw ServerError(ServerErrc::InvalidRequest, "submission must be an object");
  TurnSubmission s;
  try {
    if (j.contains("tape") && !j.at("tape").is_null()) {
      const auto& t = j.at("tape");
      s.tape = t.is_string() ? tape::parse_tape_text(t.get<std::string>())
                             : tape::parse_tape(t.get<std::vector<std::string>>());
    }
    if (j.contains("endingState") && !j.at("endingState").is_null()) s.ending_state = grid_from_json(j.at("endingState"));
    if (j.contains("instruction") && !j.at("instruction").is_null()) s.instruction = j.at("instruction").get<std::string>();
    s.ambiguous = j.value("ambiguous", false);
    if (j.contains("clarificationQuestion") && !j.at("clarificationQuestion").is_null()) {
      s.question = j.at("clarificationQuestion").get<std::string>();
    }
  } catch (const tape::ParseError& e) {
    throw ServerError(ServerErrc::ValidationError, e.what());
  } catch (const std::exception& e) {
    throw ServerError(ServerErrc::InvalidRequest, std::string("malformed submission: ") + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------

struct GameServer::Slot {
  Slot(std::string id, Task task, session::SessionConfig cfg) : game(std::move(id), std::move(task), cfg) {}

  std::mutex mutex;
  session::GameSession game;
  std::string agent_id;
  std::string human_id;
  std::shared_ptr<Endpoint> agent;
  std::shared_ptr<Endpoint> human;
  steady::time_point started;
  std::optional<steady::time_point> human_gone;
  std::optional<std::pair<std::string, int>> comparison;
  std::optional<std::string> completion_code;
};

struct GameServer::CollectionGame {
  struct Lease {
    std::string id;
    std::string annotator;
    steady::time_point deadline;
  };

  std::int64_t id = 0;
  std::string task_id;
  BlockGrid target;
  WorldState world;
  PlayerRole next_role = PlayerRole::Architect;
  std::int64_t next_step = 1;
  std::set<std::string> architects;
  std::set<std::string> builders;
  std::optional<Lease> lease;
  std::optional<std::string> pending_instruction;
};

GameServer::GameServer(ServerConfig config, std::shared_ptr<Storage> storage, Clock clock)
    : config_(std::move(config)), storage_(std::move(storage)), clock_(std::move(clock)), rng_(config_.seed) {
  if (!storage_) throw std::invalid_argument("storage must not be null");
  if (!config_.palette_file.empty()) palette_ = Palette::load(config_.palette_file);
  for (const auto& row : storage_->rows("tasks")) {
    Task t = session::task_from_json(row);
    tasks_[t.id] = std::move(t);
  }
}

std::shared_ptr<GameServer::Slot> GameServer::find_slot(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw ServerError(ServerErrc::UnknownSession, "no session " + session_id);
  return it->second;
}

void GameServer::register_agent(const std::string& agent_id, std::shared_ptr<Endpoint> endpoint) {
  if (agent_id.empty()) throw ServerError(ServerErrc::InvalidRequest, "agent id must not be empty");
  std::lock_guard lock(mutex_);
  if (agents_.count(agent_id)) throw ServerError(ServerErrc::DuplicateAgentId, "agent " + agent_id + " is connected");
  agents_[agent_id] = {std::move(endpoint), std::nullopt};
}

void GameServer::unregister_agent(const std::string& agent_id) {
  std::shared_ptr<Slot> live;
  {
    std::lock_guard lock(mutex_);
    auto it = agents_.find(agent_id);
    if (it == agents_.end()) return;
    if (it->second.live_session) live = sessions_.at(*it->second.live_session);
    agents_.erase(it);
  }
  if (live) {
    {
      std::lock_guard lock(live->mutex);
      live->agent.reset();
    }
    seal_slot(live);
  }
}

std::vector<std::string> GameServer::agents() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : agents_) out.push_back(id);
  return out;
}

bool GameServer::agent_busy(const std::string& agent_id) const {
  std::lock_guard lock(mutex_);
  auto it = agents_.find(agent_id);
  return it != agents_.end() && it->second.live_session.has_value();
}

void GameServer::add_task(Task task) {
  try {
    session::validate_task(task);
  } catch (const std::invalid_argument& e) {
    throw ServerError(ServerErrc::InvalidRequest, e.what());
  }
  storage_->append_row("tasks", session::to_json(task));
  std::lock_guard lock(mutex_);
  tasks_[task.id] = std::move(task);
}

std::optional<Task> GameServer::task(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second;
}

std::vector<Task> GameServer::tasks() const {
  std::lock_guard lock(mutex_);
  std::vector<Task> out;
  for (const auto& [_, t] : tasks_) out.push_back(t);
  return out;
}

std::string GameServer::mint_code_locked(const std::string& agent_id, const std::string& task_id) {
  if (!agents_.count(agent_id)) throw ServerError(ServerErrc::UnknownAgent, "no agent " + agent_id);
  if (!tasks_.count(task_id)) throw ServerError(ServerErrc::UnknownTask, "no task " + task_id);
  std::string code = random_token(16);
  codes_[code] = {agent_id, task_id, clock_(), false, std::nullopt};
  return code;
}

std::string GameServer::mint_join_code(const std::string& agent_id, const std::string& task_id) {
  std::lock_guard lock(mutex_);
  return mint_code_locked(agent_id, task_id);
}

json GameServer::joined_message(const Slot& slot) const {
  std::string label = "Builder";
  if (slot.comparison) label = slot.comparison->second == 0 ? "Agent 1" : "Agent 2";
  json chat = json::array();
  for (const auto& c : slot.game.chat_history()) chat.push_back(protocol::to_json(protocol::EventKind{c}));
  return {{"type", "joined"},
          {"sessionId", slot.game.id()},
          {"task", session::to_json(slot.game.task())},
          {"world", protocol::world_to_json(slot.game.world())},
          {"chat", chat},
          {"phase", std::string(session::to_string(slot.game.phase()))},
          {"lastSeq", slot.game.log().size()},
          {"stepBudget", slot.game.step_budget()},
          {"builder", label}};
}

std::string GameServer::join_game(const std::string& code, const std::string& human_id,
                                  std::shared_ptr<Endpoint> human) {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(mutex_);
    auto it = codes_.find(code);
    if (it == codes_.end() || clock_() - it->second.minted > config_.join_code_ttl) {
      throw ServerError(ServerErrc::InvalidCode, "unknown or expired join code");
    }
    CodeEntry& entry = it->second;
    if (entry.used) throw ServerError(ServerErrc::CodeAlreadyUsed, "join code already used");
    auto agent = agents_.find(entry.agent_id);
    if (agent == agents_.end() || agent->second.live_session) {
      throw ServerError(ServerErrc::AgentUnavailable, "agent is disconnected or in another game");
    }
    auto task = tasks_.find(entry.task_id);
    if (task == tasks_.end()) throw ServerError(ServerErrc::UnknownTask, "task was removed");

    std::string id;
    do {
      id = "s-" + random_token(8);
    } while (sessions_.count(id));
    slot = std::make_shared<Slot>(id, task->second, session::SessionConfig{config_.step_budget});
    slot->agent_id = entry.agent_id;
    slot->human_id = human_id;
    slot->agent = agent->second.endpoint;
    slot->human = std::move(human);
    slot->started = clock_();
    slot->comparison = entry.comparison;
    entry.used = true;
    agent->second.live_session = id;
    sessions_[id] = slot;
    if (entry.comparison) comparisons_.at(entry.comparison->first).slots[entry.comparison->second].session_id = id;
  }

  std::lock_guard lock(slot->mutex);
  send_quietly(slot->human, joined_message(*slot));
  send_quietly(slot->agent, {{"type", "session_start"},
                             {"sessionId", slot->game.id()},
                             {"world", protocol::world_to_json(slot->game.world())},
                             {"stepBudget", slot->game.step_budget()}});
  const auto events = slot->game.start();
  storage_->append_events(slot->game.id(), events);
  deliver_locked(*slot, events);
  return slot->game.id();
}

void GameServer::resume_game(const std::string& session_id, const std::string& human_id,
                             std::shared_ptr<Endpoint> human) {
  auto slot = find_slot(session_id);
  std::lock_guard lock(slot->mutex);
  if (slot->human_id != human_id) throw ServerError(ServerErrc::NotParticipant, "not the architect of " + session_id);
  if (!slot->game.live()) throw ServerError(ServerErrc::SessionEnded, "session " + session_id + " has ended");
  slot->human = std::move(human);
  slot->human_gone.reset();
  send_quietly(slot->human, joined_message(*slot));
}

void GameServer::deliver_locked(Slot& slot, const std::vector<GameEvent>& events) {
  for (const auto& e : events) {
    const json message = protocol::to_json(e);
    send_quietly(slot.human, message);
    send_quietly(slot.agent, message);
  }
}

PostResult GameServer::post_locked(Slot& slot, PlayerRole role, const protocol::EventKind& kind) {
  if (const auto* b = std::get_if<protocol::BlockPlaced>(&kind); b && !palette_.contains(b->id)) {
    throw ServerError(ServerErrc::RuleViolation, "block id " + std::to_string(b->id) + " is not in the palette");
  }
  std::vector<GameEvent> events;
  try {
    events = slot.game.post(role, kind);
  } catch (const session::SessionError& e) {
    throw ServerError(from_session(e.code()), e.what());
  }
  storage_->append_events(slot.game.id(), events);
  deliver_locked(slot, events);
  PostResult result{events.front().seq, slot.game.phase(), std::nullopt};
  if (!slot.game.live()) result.completion_code = finalize_locked(slot);
  return result;
}

std::string GameServer::finalize_locked(Slot& slot) {
  const auto& game = slot.game;
  const std::string code = random_token(16);
  json instructions = json::array();
  json questions = json::array();
  for (const auto& c : game.chat_history()) {
    (c.role == PlayerRole::Architect ? instructions : questions).push_back(c.text);
  }
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(clock_() - slot.started);
  json summary{{"sessionId", game.id()},
               {"taskId", game.task().id},
               {"agentId", slot.agent_id},
               {"humanId", slot.human_id},
               {"success", game.success().value_or(false)},
               {"completionCode", code},
               {"instructions", instructions},
               {"questions", questions},
               {"builderSteps", game.total_builder_steps()},
               {"builderTurns", game.builder_turn_index()},
               {"eventCount", game.log().size()},
               {"durationSeconds", static_cast<double>(elapsed.count()) / 1000.0}};
  if (slot.comparison) {
    summary["hitId"] = slot.comparison->first;
    summary["slot"] = slot.comparison->second + 1;
  }
  storage_->put_object("session-" + game.id(), {{"summary", summary},
                                                {"task", session::to_json(game.task())},
                                                {"finalWorld", protocol::world_to_json(game.world())}});
  storage_->append_row("games", summary);
  slot.completion_code = code;
  {
    std::lock_guard lock(mutex_);
    completion_codes_[code] = game.id();
    auto agent = agents_.find(slot.agent_id);
    if (agent != agents_.end() && agent->second.live_session == game.id()) agent->second.live_session.reset();
    if (slot.comparison) comparisons_.at(slot.comparison->first).slots[slot.comparison->second].finished = true;
  }
  const bool success = game.success().value_or(false);
  send_quietly(slot.human, {{"type", "completion"}, {"sessionId", game.id()}, {"code", code}, {"success", success}});
  send_quietly(slot.agent, {{"type", "session_end"}, {"sessionId", game.id()}, {"success", success}});
  return code;
}

bool GameServer::seal_slot(const std::shared_ptr<Slot>& slot) {
  std::lock_guard lock(slot->mutex);
  if (!slot->game.live()) return false;
  const auto events = slot->game.seal(false);
  storage_->append_events(slot->game.id(), events);
  deliver_locked(*slot, events);
  finalize_locked(*slot);
  return true;
}

PostResult GameServer::post_event(const std::string& session_id, PlayerRole role, const std::string& participant_id,
                                  const protocol::EventKind& kind) {
  auto slot = find_slot(session_id);
  std::lock_guard lock(slot->mutex);
  const bool member = (role == PlayerRole::Architect && participant_id == slot->human_id) ||
                      (role == PlayerRole::Builder && participant_id == slot->agent_id);
  if (!member) {
    throw ServerError(ServerErrc::NotParticipant,
                      participant_id + " is not the " + std::string(protocol::to_string(role)) + " of " + session_id);
  }
  return post_locked(*slot, role, kind);
}

Phase GameServer::end_turn(const std::string& session_id, PlayerRole role, const std::string& participant_id) {
  return post_event(session_id, role, participant_id, protocol::TurnEnded{role}).phase;
}

std::string GameServer::end_game(const std::string& session_id, const std::string& human_id, bool success) {
  return *post_event(session_id, PlayerRole::Architect, human_id, protocol::GameEnded{success, PlayerRole::Architect})
              .completion_code;
}

void GameServer::human_disconnected(const std::string& session_id, const std::string& human_id) {
  std::shared_ptr<Slot> slot;
  try {
    slot = find_slot(session_id);
  } catch (const ServerError&) {
    return;
  }
  std::lock_guard lock(slot->mutex);
  if (slot->human_id != human_id || !slot->game.live()) return;
  slot->human.reset();
  slot->human_gone = clock_();
}

std::vector<GameEvent> GameServer::events_since(const std::string& session_id, std::uint64_t after_seq) const {
  auto slot = find_slot(session_id);
  std::lock_guard lock(slot->mutex);
  const auto& log = slot->game.log();
  const auto first = std::min<std::uint64_t>(after_seq, log.size());
  return {log.begin() + static_cast<std::ptrdiff_t>(first), log.end()};
}

std::optional<Phase> GameServer::phase(const std::string& session_id) const {
  try {
    auto slot = find_slot(session_id);
    std::lock_guard lock(slot->mutex);
    return slot->game.phase();
  } catch (const ServerError&) {
    return std::nullopt;
  }
}

std::optional<WorldState> GameServer::world(const std::string& session_id) const {
  try {
    auto slot = find_slot(session_id);
    std::lock_guard lock(slot->mutex);
    return slot->game.world();
  } catch (const ServerError&) {
    return std::nullopt;
  }
}

std::optional<json> GameServer::log_by_completion_code(const std::string& code) const {
  std::optional<std::string> session_id;
  {
    std::lock_guard lock(mutex_);
    if (auto it = completion_codes_.find(code); it != completion_codes_.end()) session_id = it->second;
  }
  if (!session_id) {
    for (const auto& row : storage_->rows("games")) {
      if (row.value("completionCode", "") == code) session_id = row.at("sessionId").get<std::string>();
    }
  }
  if (!session_id) return std::nullopt;
  auto object = storage_->get_object("session-" + *session_id);
  if (!object) return std::nullopt;
  json events = json::array();
  for (const auto& e : storage_->load_events(*session_id)) events.push_back(protocol::to_json(e));
  (*object)["events"] = std::move(events);
  return object;
}

ComparisonAssignment GameServer::create_comparison(const std::string& task_id, const std::string& agent_x,
                                                   const std::string& agent_y, std::optional<std::uint64_t> seed) {
  if (agent_x == agent_y) throw ServerError(ServerErrc::SameAgent, "a comparison needs two distinct agents");
  std::lock_guard lock(mutex_);
  if (!tasks_.count(task_id)) throw ServerError(ServerErrc::UnknownTask, "no task " + task_id);
  for (const auto* a : {&agent_x, &agent_y}) {
    if (!agents_.count(*a)) throw ServerError(ServerErrc::UnknownAgent, "no agent " + *a);
  }
  std::mt19937_64 order(seed.value_or(rng_()));
  const bool swap = (order() & 1u) != 0;
  const std::string& first = swap ? agent_y : agent_x;
  const std::string& second = swap ? agent_x : agent_y;

  ComparisonAssignment c;
  c.hit_id = "hit-" + padded(next_hit_++);
  c.task_id = task_id;
  c.slots[0] = {"Agent 1", first, mint_code_locked(first, task_id), std::nullopt, false};
  c.slots[1] = {"Agent 2", second, mint_code_locked(second, task_id), std::nullopt, false};
  codes_.at(c.slots[0].join_code).comparison = std::pair{c.hit_id, 0};
  codes_.at(c.slots[1].join_code).comparison = std::pair{c.hit_id, 1};
  comparisons_[c.hit_id] = c;
  storage_->put_object("comparison-" + c.hit_id, to_json(c));
  return c;
}

std::optional<ComparisonAssignment> GameServer::comparison(const std::string& hit_id) const {
  std::lock_guard lock(mutex_);
  auto it = comparisons_.find(hit_id);
  if (it == comparisons_.end()) return std::nullopt;
  return it->second;
}

json GameServer::participant_view(const std::string& hit_id) const {
  const auto c = comparison(hit_id);
  if (!c) throw ServerError(ServerErrc::UnknownComparison, "no comparison " + hit_id);
  json games = json::array();
  for (const auto& s : c->slots) games.push_back({{"label", s.label}, {"joinCode", s.join_code}, {"finished", s.finished}});
  const bool both = c->slots[0].finished && c->slots[1].finished;
  return {{"hitId", c->hit_id},
          {"taskId", c->task_id},
          {"games", games},
          {"verdictOpen", both && !c->verdict},
          {"verdict", c->verdict ? json(c->slots[*c->verdict - 1].label) : json(nullptr)}};
}

metrics::GameOutcome GameServer::submit_verdict(const std::string& hit_id, int winner_slot,
                                                const std::array<std::string, 2>& feedback) {
  if (winner_slot != 1 && winner_slot != 2) throw ServerError(ServerErrc::InvalidRequest, "winner must be 1 or 2");
  metrics::GameOutcome outcome;
  json stored;
  {
    std::lock_guard lock(mutex_);
    auto it = comparisons_.find(hit_id);
    if (it == comparisons_.end()) throw ServerError(ServerErrc::UnknownComparison, "no comparison " + hit_id);
    auto& c = it->second;
    if (c.verdict) throw ServerError(ServerErrc::VerdictAlreadySubmitted, "verdict already recorded for " + hit_id);
    if (!c.slots[0].finished || !c.slots[1].finished) {
      throw ServerError(ServerErrc::VerdictNotReady, "both games must end before the verdict");
    }
    c.verdict = winner_slot;
    c.feedback = feedback;
    outcome = {c.hit_id, c.slots[0].agent_id, c.slots[1].agent_id, c.task_id, c.slots[winner_slot - 1].agent_id};
    stored = to_json(c);
  }
  json row = metrics::to_json(outcome);
  row["feedback"] = {{"Agent 1", feedback[0]}, {"Agent 2", feedback[1]}};
  storage_->append_row("verdicts", row);
  storage_->put_object("comparison-" + hit_id, stored);
  return outcome;
}

std::vector<metrics::GameOutcome> GameServer::outcomes() const {
  std::vector<metrics::GameOutcome> out;
  for (const auto& row : storage_->rows("verdicts")) out.push_back(metrics::game_outcome_from_json(row));
  return out;
}

std::int64_t GameServer::open_collection_game(const std::string& task_id) {
  if (!config_.collection_mode) throw ServerError(ServerErrc::CollectionDisabled, "collection mode is off");
  std::lock_guard lock(mutex_);
  auto task = tasks_.find(task_id);
  if (task == tasks_.end()) throw ServerError(ServerErrc::UnknownTask, "no task " + task_id);
  auto game = std::make_shared<CollectionGame>();
  game->id = next_collection_game_++;
  game->task_id = task_id;
  game->target = task->second.target;
  game->world = spawn_state(task->second.initial);
  collection_[game->id] = game;
  return game->id;
}

void GameServer::expire_leases_locked(steady::time_point now) {
  for (auto& [_, game] : collection_) {
    if (game->lease && game->lease->deadline <= now) game->lease.reset();
  }
}

std::optional<TurnAssignment> GameServer::next_open_turn(const std::string& annotator_id) {
  if (!config_.collection_mode) throw ServerError(ServerErrc::CollectionDisabled, "collection mode is off");
  std::lock_guard lock(mutex_);
  const auto now = clock_();
  expire_leases_locked(now);
  for (auto& [id, game] : collection_) {
    if (game->lease) continue;
    const auto& excluded = game->next_role == PlayerRole::Architect ? game->builders : game->architects;
    if (excluded.count(annotator_id)) continue;
    game->lease = CollectionGame::Lease{random_token(16), annotator_id, now + config_.lease_timeout};
    leases_[game->lease->id] = id;
    TurnAssignment a;
    a.game_id = id;
    a.step_id = game->next_step;
    a.role = game->next_role;
    a.lease_id = game->lease->id;
    a.deadline = game->lease->deadline;
    a.start = game->world;
    if (a.role == PlayerRole::Architect) {
      a.target = game->target;
    } else {
      a.instruction = game->pending_instruction;
    }
    return a;
  }
  return std::nullopt;
}

std::vector<std::string> GameServer::submit_single_turn(const std::string& lease_id, const TurnSubmission& sub) {
  if (!config_.collection_mode) throw ServerError(ServerErrc::CollectionDisabled, "collection mode is off");
  std::lock_guard lock(mutex_);
  auto lease = leases_.find(lease_id);
  if (lease == leases_.end()) throw ServerError(ServerErrc::UnknownLease, "unknown lease");
  auto& game = *collection_.at(lease->second);
  if (!game.lease || game.lease->id != lease_id || game.lease->deadline <= clock_()) {
    if (game.lease && game.lease->id == lease_id) game.lease.reset();
    leases_.erase(lease);
    throw ServerError(ServerErrc::LeaseExpired, "lease expired; the turn returned to the queue");
  }
  const std::string annotator = game.lease->annotator;
  const std::string record_id = "g" + std::to_string(game.id) + "-s" + std::to_string(game.next_step);

  auto replay_checked = [&](const tape::Tape& t) {
    try {
      return tape::replay(t, game.world);
    } catch (const std::exception& e) {
      throw ServerError(ServerErrc::ValidationError, std::string("tape does not replay: ") + e.what());
    }
  };

  json row{{"recordId", record_id}, {"gameId", game.id}, {"stepId", game.next_step}, {"annotatorId", annotator}};
  if (game.next_role == PlayerRole::Architect) {
    const std::string instruction = trimmed(sub.instruction.value_or(""));
    if (instruction.empty()) throw ServerError(ServerErrc::ValidationError, "ideation needs an instruction");
    if (!sub.tape) throw ServerError(ServerErrc::ValidationError, "ideation needs a tape");
    const WorldState end = replay_checked(*sub.tape);
    if (sub.ending_state && *sub.ending_state != end.grid) {
      throw ServerError(ServerErrc::ValidationError, "ending state disagrees with the tape");
    }
    dataset::ArchitectRecord r;
    r.game_id = game.id;
    r.step_id = game.next_step;
    r.command = instruction;
    r.annotator_id = annotator;
    r.structure_id = game.task_id;
    row["kind"] = "ideation";
    row["record"] = dataset::to_json(r);
    row["startingWorldState"] = grid_to_json(game.world.grid);
    row["tape"] = tape::serialize_tape(*sub.tape);
    row["ideationEndingState"] = grid_to_json(end.grid);
    storage_->append_row("collection", row);
    game.architects.insert(annotator);
    game.pending_instruction = instruction;
    game.next_role = PlayerRole::Builder;
  } else {
    dataset::BuilderRecord r;
    r.game_id = game.id;
    r.step_id = game.next_step;
    r.annotator_id = annotator;
    WorldState end = game.world;
    if (sub.ambiguous) {
      const std::string question = trimmed(sub.question.value_or(""));
      if (question.empty()) throw ServerError(ServerErrc::MissingQuestion, "an unclear instruction needs a question");
      r.ambiguous = true;
      r.clarification_question = question;
    } else {
      if (!sub.tape || !sub.ending_state) {
        throw ServerError(ServerErrc::ValidationError, "execution needs a tape and an ending state");
      }
      end = replay_checked(*sub.tape);
      const auto mismatch = diff(*sub.ending_state, end.grid);
      if (!mismatch.empty()) {
        throw ServerError(ServerErrc::ValidationError,
                          "ending state disagrees with the tape in " + std::to_string(mismatch.size()) + " cells");
      }
      r.ambiguous = false;
      r.tape = *sub.tape;
    }
    r.avatar = end.avatar;
    r.world_ending_state = end.grid;
    row["kind"] = "execution";
    row["instruction"] = game.pending_instruction.value_or("");
    row["record"] = dataset::to_json(r);
    storage_->append_row("collection", row);
    game.builders.insert(annotator);
    game.world = std::move(end);
    game.pending_instruction.reset();
    game.next_role = PlayerRole::Architect;
  }
  ++game.next_step;
  game.lease.reset();
  leases_.erase(lease_id);
  return {record_id};
}

std::size_t GameServer::tick() {
  const auto now = clock_();
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::lock_guard lock(mutex_);
    expire_leases_locked(now);
    for (const auto& [_, s] : sessions_) slots.push_back(s);
  }
  std::size_t sealed = 0;
  for (const auto& slot : slots) {
    bool overdue = false;
    {
      std::lock_guard lock(slot->mutex);
      overdue = slot->game.live() && (now - slot->started > config_.session_cap ||
                                      (slot->human_gone && now - *slot->human_gone > config_.disconnect_grace));
    }
    if (overdue && seal_slot(slot)) ++sealed;
  }
  return sealed;
}

std::size_t GameServer::shutdown() {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [_, s] : sessions_) slots.push_back(s);
  }
  std::size_t sealed = 0;
  for (const auto& slot : slots) sealed += seal_slot(slot) ? 1 : 0;
  return sealed;
}

json GameServer::stats() const {
  std::vector<std::shared_ptr<Slot>> slots;
  json j;
  {
    std::lock_guard lock(mutex_);
    std::size_t busy = 0;
    for (const auto& [_, a] : agents_) busy += a.live_session ? 1 : 0;
    std::size_t verdicts = 0;
    for (const auto& [_, c] : comparisons_) verdicts += c.verdict ? 1 : 0;
    std::size_t leased = 0;
    for (const auto& [_, g] : collection_) leased += g->lease ? 1 : 0;
    j = {{"agents", agents_.size()},
         {"busyAgents", busy},
         {"tasks", tasks_.size()},
         {"comparisons", comparisons_.size()},
         {"verdicts", verdicts},
         {"collectionGames", collection_.size()},
         {"leasedTurns", leased}};
    for (const auto& [_, s] : sessions_) slots.push_back(s);
  }
  std::size_t live = 0;
  std::size_t succeeded = 0;
  for (const auto& slot : slots) {
    std::lock_guard lock(slot->mutex);
    live += slot->game.live() ? 1 : 0;
    succeeded += slot->game.success().value_or(false) ? 1 : 0;
  }
  j["liveSessions"] = live;
  j["endedSessions"] = slots.size() - live;
  j["successfulSessions"] = succeeded;
  j["collectionRecords"] = storage_->rows("collection").size();
  return j;
}

}  // namespace iglu::server
