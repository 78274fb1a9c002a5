#include <gtest/gtest.h>

#include <thread>

#include "iglu/server.hpp"
#include "oracles.hpp"

using namespace iglu;
using namespace iglu::server;
using namespace iglu::protocol;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

struct Recorder : Endpoint {
  std::mutex mutex;
  std::vector<json> messages;
  void send(const json& m) override {
    std::lock_guard lock(mutex);
    messages.push_back(m);
  }
  std::vector<json> of_type(const std::string& type) {
    std::lock_guard lock(mutex);
    std::vector<json> out;
    for (const auto& m : messages) {
      if (m.value("type", "") == type) out.push_back(m);
    }
    return out;
  }
  std::vector<std::uint64_t> seqs() {
    std::lock_guard lock(mutex);
    std::vector<std::uint64_t> out;
    for (const auto& m : messages) {
      if (is_event_message(m)) out.push_back(m.at("seq").get<std::uint64_t>());
    }
    return out;
  }
};

struct FakeClock {
  std::shared_ptr<std::chrono::steady_clock::time_point> now =
      std::make_shared<std::chrono::steady_clock::time_point>(std::chrono::steady_clock::time_point{} + 1h);
  Clock fn() const {
    auto p = now;
    return [p] { return *p; };
  }
  void advance(std::chrono::seconds s) const { *now += s; }
};

Task two_block_task() {
  Task t;
  t.id = "two";
  t.target.set({1, 0, 0}, 50);
  t.target.set({1, 1, 0}, 57);
  return t;
}

class ServerTest : public ::testing::Test {
 protected:
  ServerTest() : storage(std::make_shared<MemoryStorage>()), game(make_config(), storage, clock.fn()) {
    game.add_task(two_block_task());
    game.register_agent("bot", agent);
    game.register_agent("other", other_agent);
  }

  static ServerConfig make_config() {
    ServerConfig c;
    c.seed = 42;
    c.collection_mode = true;
    c.session_cap = 600s;
    c.disconnect_grace = 60s;
    c.lease_timeout = 120s;
    c.join_code_ttl = 3600s;
    return c;
  }

  std::string start_session(const std::string& agent_id = "bot") {
    const auto code = game.mint_join_code(agent_id, "two");
    return game.join_game(code, "human", human);
  }

  FakeClock clock;
  std::shared_ptr<MemoryStorage> storage;
  GameServer game;
  std::shared_ptr<Recorder> agent = std::make_shared<Recorder>();
  std::shared_ptr<Recorder> other_agent = std::make_shared<Recorder>();
  std::shared_ptr<Recorder> human = std::make_shared<Recorder>();
};

}  // namespace

TEST_F(ServerTest, JoinCodeIsSingleUse) {
  const auto code = game.mint_join_code("bot", "two");
  const auto sid = game.join_game(code, "human", human);
  EXPECT_EQ(game.phase(sid), Phase::ArchitectTurn);
  EXPECT_TRUE(game.agent_busy("bot"));
  try {
    game.join_game(code, "human2", std::make_shared<Recorder>());
    FAIL();
  } catch (const ServerError& e) {
    EXPECT_EQ(e.code(), ServerErrc::CodeAlreadyUsed);
  }
  ASSERT_EQ(human->of_type("joined").size(), 1u);
  EXPECT_EQ(human->of_type("joined")[0].at("builder"), "Builder");
  ASSERT_EQ(agent->of_type("session_start").size(), 1u);
  EXPECT_EQ(human->seqs(), (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(agent->seqs(), (std::vector<std::uint64_t>{1, 2}));
}

TEST_F(ServerTest, MintAndJoinErrors) {
  auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const ServerError& e) {
      return e.code();
    }
    return ServerErrc::InvalidRequest;
  };
  EXPECT_EQ(code_of([&] { game.mint_join_code("ghost", "two"); }), ServerErrc::UnknownAgent);
  EXPECT_EQ(code_of([&] { game.mint_join_code("bot", "nope"); }), ServerErrc::UnknownTask);
  EXPECT_EQ(code_of([&] { game.join_game("bogus", "h", human); }), ServerErrc::InvalidCode);
  EXPECT_EQ(code_of([&] { game.register_agent("bot", agent); }), ServerErrc::DuplicateAgentId);

  const auto stale = game.mint_join_code("bot", "two");
  clock.advance(3601s);
  EXPECT_EQ(code_of([&] { game.join_game(stale, "h", human); }), ServerErrc::InvalidCode);

  const auto first = game.mint_join_code("bot", "two");
  const auto second = game.mint_join_code("bot", "two");
  game.join_game(first, "h", human);
  EXPECT_EQ(code_of([&] { game.join_game(second, "h2", std::make_shared<Recorder>()); }), ServerErrc::AgentUnavailable);
}

TEST_F(ServerTest, FullGameProducesReplayableLog) {
  const auto sid = start_session();
  game.post_event(sid, PlayerRole::Architect, "human", ChatMessage{PlayerRole::Architect, "build it"});
  EXPECT_EQ(game.end_turn(sid, PlayerRole::Architect, "human"), Phase::BuilderTurn);
  game.post_event(sid, PlayerRole::Builder, "bot", BlockPlaced{{1, 0, 0}, 50});
  game.post_event(sid, PlayerRole::Builder, "bot", BlockPlaced{{1, 1, 0}, 57});
  game.end_turn(sid, PlayerRole::Builder, "bot");
  const auto code = game.end_game(sid, "human", true);
  EXPECT_FALSE(game.agent_busy("bot"));

  const auto log = game.log_by_completion_code(code);
  ASSERT_TRUE(log);
  EXPECT_EQ(log->at("summary").at("success"), true);
  EXPECT_EQ(log->at("summary").at("builderSteps"), 2);
  EXPECT_EQ(log->at("summary").at("instructions"), json::array({"build it"}));
  std::vector<GameEvent> events;
  for (const auto& e : log->at("events")) events.push_back(game_event_from_json(e));
  EXPECT_FALSE(session::audit_log(events));
  EXPECT_EQ(session::replay_log(two_block_task(), events).grid, two_block_task().target);
  EXPECT_EQ(human->of_type("completion").size(), 1u);
  EXPECT_EQ(agent->of_type("session_end").size(), 1u);
  EXPECT_EQ(storage->rows("games").size(), 1u);
  EXPECT_FALSE(game.log_by_completion_code("nope"));

  // Both parties saw the same gapless stream.
  const auto seqs = human->seqs();
  for (std::size_t i = 0; i < seqs.size(); ++i) EXPECT_EQ(seqs[i], i + 1);
  EXPECT_EQ(agent->seqs(), seqs);
}

TEST_F(ServerTest, ParticipantsAndPaletteAreEnforced) {
  const auto sid = start_session();
  EXPECT_THROW(game.post_event(sid, PlayerRole::Architect, "intruder", ChatMessage{PlayerRole::Architect, "x"}),
               ServerError);
  game.end_turn(sid, PlayerRole::Architect, "human");
  try {
    game.post_event(sid, PlayerRole::Builder, "bot", BlockPlaced{{1, 0, 0}, 1});
    FAIL();
  } catch (const ServerError& e) {
    EXPECT_EQ(e.code(), ServerErrc::RuleViolation);
  }
  try {
    game.post_event(sid, PlayerRole::Architect, "human", ChatMessage{PlayerRole::Architect, "hurry"});
    FAIL();
  } catch (const ServerError& e) {
    EXPECT_EQ(e.code(), ServerErrc::WrongPhase);
  }
  EXPECT_THROW(game.post_event("s-missing", PlayerRole::Architect, "human", TurnEnded{}), ServerError);
}

TEST_F(ServerTest, AgentDisconnectSealsSession) {
  const auto sid = start_session();
  game.unregister_agent("bot");
  EXPECT_EQ(game.phase(sid), Phase::Ended);
  const auto completion = human->of_type("completion");
  ASSERT_EQ(completion.size(), 1u);
  EXPECT_EQ(completion[0].at("success"), false);
}

TEST_F(ServerTest, TickSealsOverdueAndAbandonedSessions) {
  const auto capped = start_session("bot");
  const auto abandoned = start_session("other");
  EXPECT_EQ(game.tick(), 0u);
  game.human_disconnected(abandoned, "human");
  clock.advance(61s);
  EXPECT_EQ(game.tick(), 1u);
  EXPECT_EQ(game.phase(abandoned), Phase::Ended);
  EXPECT_EQ(game.phase(capped), Phase::ArchitectTurn);
  clock.advance(600s);
  EXPECT_EQ(game.tick(), 1u);
  EXPECT_EQ(game.phase(capped), Phase::Ended);
  EXPECT_EQ(game.stats().at("endedSessions"), 2);
}

TEST_F(ServerTest, ResumeResendsJoinedAndEventsSinceSupportResync) {
  const auto sid = start_session();
  game.post_event(sid, PlayerRole::Architect, "human", ChatMessage{PlayerRole::Architect, "hi"});
  auto again = std::make_shared<Recorder>();
  game.human_disconnected(sid, "human");
  game.resume_game(sid, "human", again);
  ASSERT_EQ(again->of_type("joined").size(), 1u);
  EXPECT_EQ(again->of_type("joined")[0].at("lastSeq"), 3);
  EXPECT_EQ(again->of_type("joined")[0].at("chat").size(), 1u);
  EXPECT_THROW(game.resume_game(sid, "stranger", again), ServerError);
  EXPECT_EQ(game.events_since(sid, 1).size(), 2u);
  EXPECT_TRUE(game.events_since(sid, 99).empty());
}

TEST_F(ServerTest, BuilderStepBudgetEndsTurn) {
  ServerConfig c = make_config();
  c.step_budget = 1;
  GameServer small(c, std::make_shared<MemoryStorage>(), clock.fn());
  small.add_task(two_block_task());
  small.register_agent("bot", agent);
  const auto sid = small.join_game(small.mint_join_code("bot", "two"), "h", human);
  small.end_turn(sid, PlayerRole::Architect, "h");
  const auto r = small.post_event(sid, PlayerRole::Builder, "bot", BlockPlaced{{1, 0, 0}, 50});
  EXPECT_EQ(r.phase, Phase::ArchitectTurn);
}

TEST_F(ServerTest, BlindedComparisonFlow) {
  const auto c = game.create_comparison("two", "bot", "other", 7);
  const auto view = game.participant_view(c.hit_id);
  EXPECT_EQ(view.dump().find("bot"), std::string::npos);
  EXPECT_EQ(view.dump().find("other"), std::string::npos);
  EXPECT_EQ(view.at("verdictOpen"), false);
  EXPECT_THROW(game.submit_verdict(c.hit_id, 1), ServerError);
  EXPECT_THROW(game.create_comparison("two", "bot", "bot"), ServerError);

  for (int slot = 0; slot < 2; ++slot) {
    auto h = std::make_shared<Recorder>();
    const auto sid = game.join_game(c.slots[slot].join_code, "human", h);
    EXPECT_EQ(h->of_type("joined")[0].at("builder"), c.slots[slot].label);
    EXPECT_EQ(h->of_type("joined")[0].dump().find(c.slots[slot].agent_id), std::string::npos);
    game.end_game(sid, "human", slot == 0);
  }
  EXPECT_EQ(game.participant_view(c.hit_id).at("verdictOpen"), true);
  EXPECT_THROW(game.submit_verdict(c.hit_id, 3), ServerError);
  const auto outcome = game.submit_verdict(c.hit_id, 2, {"meh", "good"});
  EXPECT_EQ(outcome.winner, c.slots[1].agent_id);
  EXPECT_THROW(game.submit_verdict(c.hit_id, 1), ServerError);
  ASSERT_EQ(game.outcomes().size(), 1u);
  EXPECT_EQ(metrics::tally_human_eval(game.outcomes()).size(), 2u);
}

TEST_F(ServerTest, ComparisonSlotOrderIsSeeded) {
  const auto a = game.create_comparison("two", "bot", "other", 1234);
  const auto b = game.create_comparison("two", "bot", "other", 1234);
  EXPECT_EQ(a.slots[0].agent_id, b.slots[0].agent_id);
  std::set<std::string> firsts;
  for (std::uint64_t s = 0; s < 32; ++s) firsts.insert(game.create_comparison("two", "bot", "other", s).slots[0].agent_id);
  EXPECT_EQ(firsts.size(), 2u);
}

TEST_F(ServerTest, CollectionTurnsAlternateAndValidate) {
  const auto gid = game.open_collection_game("two");
  auto turn = game.next_open_turn("ann1");
  ASSERT_TRUE(turn);
  EXPECT_EQ(turn->game_id, gid);
  EXPECT_EQ(turn->role, PlayerRole::Architect);
  ASSERT_TRUE(turn->target);
  EXPECT_FALSE(game.next_open_turn("ann2"));  // leased

  TurnSubmission ideation;
  ideation.instruction = "place a yellow block east of the start";
  const std::vector<BuildAction> place{PlaceBlock{{1, 0, 0}, 50}};
  ideation.tape = tape::record_tape(spawn_state({}), place);
  game.submit_single_turn(turn->lease_id, ideation);

  EXPECT_FALSE(game.next_open_turn("ann1"));  // the architect may not execute their own instruction
  turn = game.next_open_turn("ann2");
  ASSERT_TRUE(turn);
  EXPECT_EQ(turn->role, PlayerRole::Builder);
  EXPECT_EQ(turn->instruction, ideation.instruction);
  EXPECT_FALSE(turn->target);

  TurnSubmission unclear;
  unclear.ambiguous = true;
  try {
    game.submit_single_turn(turn->lease_id, unclear);
    FAIL();
  } catch (const ServerError& e) {
    EXPECT_EQ(e.code(), ServerErrc::MissingQuestion);
  }
  TurnSubmission wrong;
  wrong.tape = ideation.tape;
  wrong.ending_state = BlockGrid{};
  EXPECT_THROW(game.submit_single_turn(turn->lease_id, wrong), ServerError);

  TurnSubmission done;
  done.tape = ideation.tape;
  done.ending_state = BlockGrid{};
  done.ending_state->set({1, 0, 0}, 50);
  game.submit_single_turn(turn->lease_id, done);
  const auto rows = storage->rows("collection");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].at("kind"), "ideation");
  EXPECT_EQ(rows[1].at("kind"), "execution");
  EXPECT_EQ(rows[1].at("record").at("worldEndingState").at("blocks"), json::parse("[[1,63,0,50]]"));
}

TEST_F(ServerTest, ExpiredLeaseReturnsTurnToQueue) {
  game.open_collection_game("two");
  const auto turn = game.next_open_turn("ann1");
  ASSERT_TRUE(turn);
  clock.advance(121s);
  try {
    game.submit_single_turn(turn->lease_id, {});
    FAIL();
  } catch (const ServerError& e) {
    EXPECT_EQ(e.code(), ServerErrc::LeaseExpired);
  }
  EXPECT_TRUE(game.next_open_turn("ann2"));
}

TEST(ServerCollection, DisabledByDefault) {
  GameServer game(ServerConfig{}, std::make_shared<MemoryStorage>());
  EXPECT_THROW(game.next_open_turn("a"), ServerError);
}

TEST(ServerConcurrency, ParallelSessionsStayGapless) {
  auto storage = std::make_shared<MemoryStorage>();
  GameServer game(ServerConfig{}, storage);
  game.add_task(two_block_task());
  constexpr int kSessions = 6;
  std::vector<std::string> ids;
  for (int i = 0; i < kSessions; ++i) {
    const std::string agent = "bot" + std::to_string(i);
    game.register_agent(agent, std::make_shared<Recorder>());
    ids.push_back(game.join_game(game.mint_join_code(agent, "two"), "h" + std::to_string(i), std::make_shared<Recorder>()));
  }
  std::vector<std::thread> threads;
  for (int i = 0; i < kSessions; ++i) {
    threads.emplace_back([&, i] {
      const std::string h = "h" + std::to_string(i);
      const std::string bot = "bot" + std::to_string(i);
      for (int round = 0; round < 20; ++round) {
        game.post_event(ids[i], PlayerRole::Architect, h, ChatMessage{PlayerRole::Architect, "go"});
        game.end_turn(ids[i], PlayerRole::Architect, h);
        game.post_event(ids[i], PlayerRole::Builder, bot, PlayerMove{PlayerRole::Builder, {0.5, 0, 0}, 0, 0});
        game.end_turn(ids[i], PlayerRole::Builder, bot);
      }
      game.end_game(ids[i], h, true);
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& id : ids) {
    const auto log = storage->load_events(id);
    ASSERT_EQ(log.size(), 2u + 80u + 1u);
    EXPECT_FALSE(session::audit_log(log));
  }
}
