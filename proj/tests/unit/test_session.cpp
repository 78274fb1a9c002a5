#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "iglu/session.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace iglu;
using namespace iglu::session;
using namespace iglu::protocol;

using oracle::allowed_by_rules;
using oracle::random_kind;

namespace {

Task small_task() {
  Task t;
  t.id = "t1";
  t.target.set({1, 0, 0}, 50);
  t.target.set({1, 1, 0}, 57);
  return t;
}

}  // namespace

TEST(Session, StartJoinsBothRoles) {
  GameSession s("s", small_task());
  EXPECT_EQ(s.phase(), Phase::Created);
  const auto events = s.start();
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(s.phase(), Phase::ArchitectTurn);
  EXPECT_EQ(events[0].seq, 1u);
  EXPECT_EQ(events[1].seq, 2u);
}

TEST(Session, ArchitectCannotPlaceBlocks) {
  GameSession s("s", small_task());
  s.start();
  try {
    s.post(PlayerRole::Architect, BlockPlaced{{1, 0, 0}, 50});
    FAIL();
  } catch (const SessionError& e) {
    EXPECT_EQ(e.code(), SessionErrc::WrongPhase);
  }
  EXPECT_EQ(s.log().size(), 2u);
}

TEST(Session, FullTurnCycleAndSuccess) {
  GameSession s("s", small_task());
  s.start();
  s.post(PlayerRole::Architect, ChatMessage{PlayerRole::Architect, "put a yellow block east of you"});
  s.post(PlayerRole::Architect, TurnEnded{PlayerRole::Architect});
  EXPECT_EQ(s.phase(), Phase::BuilderTurn);
  EXPECT_EQ(s.builder_turn_index(), 1u);
  s.post(PlayerRole::Builder, BlockPlaced{{1, 0, 0}, 50});
  s.post(PlayerRole::Builder, BlockPlaced{{1, 1, 0}, 57});
  EXPECT_EQ(s.steps_this_turn(), 2u);
  s.post(PlayerRole::Builder, TurnEnded{PlayerRole::Builder});
  EXPECT_EQ(s.world().grid, s.task().target);
  s.post(PlayerRole::Architect, GameEnded{true, PlayerRole::Architect});
  EXPECT_EQ(s.success(), true);
  EXPECT_FALSE(s.live());
  EXPECT_EQ(s.chat_history().size(), 1u);
  EXPECT_THROW(s.post(PlayerRole::Architect, ChatMessage{PlayerRole::Architect, "hi"}), SessionError);
  EXPECT_THROW(s.seal(false), SessionError);
  EXPECT_FALSE(audit_log(s.log()));
  EXPECT_EQ(replay_log(s.task(), s.log()).grid, s.world().grid);
}

TEST(Session, IrrecoverableAgentEndsUnsuccessfully) {
  GameSession s("s", small_task());
  s.start();
  s.post(PlayerRole::Architect, GameEnded{false, PlayerRole::Architect});
  EXPECT_EQ(s.success(), false);
}

TEST(Session, IllegalBuilderActionIsRuleViolation) {
  GameSession s("s", small_task());
  s.start();
  s.post(PlayerRole::Architect, TurnEnded{PlayerRole::Architect});
  try {
    s.post(PlayerRole::Builder, BlockPlaced{{0, 0, 0}, 50});  // the avatar stands here
    FAIL();
  } catch (const SessionError& e) {
    EXPECT_EQ(e.code(), SessionErrc::RuleViolation);
  }
  EXPECT_THROW(s.post(PlayerRole::Builder, PlayerMove{PlayerRole::Builder, {0, 5, 0}, 0, 0}), SessionError);
  EXPECT_EQ(s.steps_this_turn(), 0u);
}

TEST(Session, StepBudgetForcesTurnEnd) {
  GameSession s("s", small_task(), SessionConfig{2});
  s.start();
  s.post(PlayerRole::Architect, TurnEnded{PlayerRole::Architect});
  s.post(PlayerRole::Builder, BlockPlaced{{1, 0, 0}, 50});
  const auto out = s.post(PlayerRole::Builder, BlockPlaced{{1, 1, 0}, 57});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].kind, (EventKind{TurnEnded{PlayerRole::Builder}}));
  EXPECT_EQ(s.phase(), Phase::ArchitectTurn);
  EXPECT_EQ(s.total_builder_steps(), 2u);
}

TEST(Session, SealFromAnyLivePhase) {
  GameSession s("s", small_task());
  const auto out = s.seal(false);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, (EventKind{GameEnded{false, PlayerRole::System}}));
  EXPECT_FALSE(s.live());
}

TEST(SessionProperty, RandomInterleavingsRespectPhaseRules) {
  std::mt19937 rng(77);
  std::size_t accepted = 0, rejected = 0, ended = 0;
  for (int game = 0; game < 300; ++game) {
    GameSession s("g" + std::to_string(game), small_task(), SessionConfig{5});
    bool architect_joined = false, builder_joined = false;
    // Most games skip the lobby so the turn phases get exercised.
    if (game % 4 != 0) {
      s.start();
      architect_joined = builder_joined = true;
    }
    std::uniform_int_distribution<int> role(0, 2);
    for (int step = 0; step < 80; ++step) {
      const auto sender = static_cast<PlayerRole>(role(rng));
      const auto kind = random_kind(rng, s.world());
      const Phase before = s.phase();
      const auto log_before = s.log();
      const auto world_before = s.world();
      const bool permitted = allowed_by_rules(before, sender, kind, architect_joined, builder_joined);
      try {
        const auto out = s.post(sender, kind);
        ++accepted;
        ASSERT_TRUE(permitted) << kind_name(kind) << " from " << to_string(sender) << " in " << to_string(before);
        ASSERT_NE(before, Phase::Ended);
        ASSERT_EQ(out.front().kind, kind);
        if (const auto* j = std::get_if<PlayerJoined>(&kind)) {
          (j->role == PlayerRole::Architect ? architect_joined : builder_joined) = true;
        }
      } catch (const SessionError& e) {
        ++rejected;
        // Permitted events fail only on voxel rules.
        if (permitted) {
          ASSERT_EQ(e.code(), SessionErrc::RuleViolation);
        }
        if (before == Phase::Ended) {
          ASSERT_EQ(e.code(), SessionErrc::SessionEnded);
        }
        ASSERT_EQ(s.log(), log_before);
        ASSERT_EQ(s.world(), world_before);
        ASSERT_EQ(s.phase(), before);
      }
    }
    ended += !s.live();
    const auto& log = s.log();
    for (std::size_t i = 0; i < log.size(); ++i) ASSERT_EQ(log[i].seq, i + 1);
    ASSERT_FALSE(audit_log(log)) << *audit_log(log);
    ASSERT_EQ(replay_log(s.task(), log).grid, s.world().grid);
    for (std::size_t i = 0; i + 1 < log.size(); ++i) {
      ASSERT_FALSE(std::holds_alternative<GameEnded>(log[i].kind)) << "event after GameEnded";
    }
  }
  EXPECT_GT(accepted, 1000u);
  EXPECT_GT(rejected, 1000u);
  EXPECT_GT(ended, 100u);
}

TEST(Audit, DetectsGapsForeignIdsAndLateEvents) {
  GameSession s("s", small_task());
  s.start();
  s.post(PlayerRole::Architect, TurnEnded{PlayerRole::Architect});
  auto log = s.log();
  ASSERT_FALSE(audit_log(log));

  auto gap = log;
  gap[1].seq = 5;
  EXPECT_TRUE(audit_log(gap));

  auto foreign = log;
  foreign[2].session_id = "other";
  EXPECT_TRUE(audit_log(foreign));

  auto late = log;
  late.insert(late.begin() + 2, GameEvent{"s", 3, GameEnded{true, PlayerRole::System}});
  late[3].seq = 4;
  EXPECT_TRUE(audit_log(late));

  auto wrong_phase = log;
  wrong_phase.push_back({"s", 4, ChatMessage{PlayerRole::Architect, "hi"}});
  EXPECT_TRUE(audit_log(wrong_phase));
}

TEST(Tasks, JsonRoundTripAndValidation) {
  const Task t = small_task();
  EXPECT_EQ(task_from_json(to_json(t)), t);
  Task same = t;
  same.target = same.initial;
  EXPECT_THROW(validate_task(same), std::invalid_argument);
  Task unnamed = t;
  unnamed.id.clear();
  EXPECT_THROW(validate_task(unnamed), std::invalid_argument);
}

TEST(Tasks, LoadsShippedDemoSet) {
  const auto tasks = load_tasks(std::string(IGLU_CONFIG_DIR) + "/tasks/demo.json");
  ASSERT_FALSE(tasks.empty());
  for (const auto& t : tasks) EXPECT_NO_THROW(validate_task(t));
  const auto p = std::filesystem::temp_directory_path() / "iglu_test_tasks_wrapped.json";
  std::ofstream(p) << nlohmann::json{{"tasks", {to_json(small_task())}}}.dump();
  EXPECT_EQ(load_tasks(p), std::vector<Task>{small_task()});
  EXPECT_THROW(load_tasks("/nonexistent/tasks.json"), std::runtime_error);
}
