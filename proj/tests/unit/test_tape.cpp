#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "iglu/dataset.hpp"
#include "iglu/grid_io.hpp"
#include "iglu/tape.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace iglu;
using namespace iglu::tape;

using oracle::random_session;
using oracle::random_tape;

namespace {

const std::vector<std::string> kFragment{
    "0 set_look (-0.004, 0)",
    "1 set_look (-0.044, -0.042)",
    "2 action step_backward",
    "3 pos_change (-0.10159854456559483, 63, 0.014814775657966633)",
    "4 action select_and_place_block 50 1 63 0",
    "5 block_change  (1, 63, 0, 0, 50)",
};

std::size_t parse_error_line(const std::vector<std::string>& lines) {
  try {
    parse_tape(lines);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(ParseTape, SampleRecordLines) {
  const auto t = parse_tape(kFragment);
  ASSERT_EQ(t.events.size(), 6u);
  EXPECT_EQ(t.events[0], (TapeEvent{0, SetLookEvent{-0.004, 0}}));
  EXPECT_EQ(t.events[2], (TapeEvent{2, ActionEvent{"step_backward", {}}}));
  EXPECT_EQ(t.events[4], (TapeEvent{4, ActionEvent{"select_and_place_block", {50, 1, 63, 0}}}));
  EXPECT_EQ(t.events[5], (TapeEvent{5, BlockChangeEvent{{1, 63, 0}, 0, 50}}));
  const auto& pc = std::get<PosChangeEvent>(t.events[3].kind);
  EXPECT_DOUBLE_EQ(pc.pos.x, -0.10159854456559483);
  EXPECT_DOUBLE_EQ(pc.pos.y, 63);
}

TEST(ParseTape, ElisionMarkerIsSkippedAndFlagged) {
  auto lines = kFragment;
  lines.push_back("...");
  const auto t = parse_tape(lines);
  EXPECT_TRUE(t.elided);
  EXPECT_EQ(t.events.size(), 6u);
  EXPECT_FALSE(parse_tape(kFragment).elided);
}

TEST(ParseTape, ErrorsCarryLineNumbers) {
  EXPECT_EQ(parse_error_line({"0 set_look (1, 2)", "x action jump"}), 2u);
  EXPECT_EQ(parse_error_line({"0 teleport (1, 2)"}), 1u);
  EXPECT_EQ(parse_error_line({"0 set_look (1, 2", "1 action jump"}), 1u);
  EXPECT_EQ(parse_error_line({"0 action select_and_place_block 50 1 63"}), 1u);
  EXPECT_EQ(parse_error_line({"0 action select_and_place_block 0 1 63 0"}), 1u);
  EXPECT_EQ(parse_error_line({"0 block_change (1, 63, 0, 50, 50)"}), 1u);
  EXPECT_EQ(parse_error_line({"3 action jump", "2 action jump"}), 2u);
  EXPECT_EQ(parse_error_line({"0 action move_north 1"}), 1u);
}

TEST(ParseTape, UnknownActionsParseWithAnyArity) {
  const auto t = parse_tape(std::vector<std::string>{"7 action wave 1 2.5", "8 action dance"});
  EXPECT_EQ(t.events[0], (TapeEvent{7, ActionEvent{"wave", {1, 2.5}}}));
  EXPECT_EQ(t.events[1], (TapeEvent{8, ActionEvent{"dance", {}}}));
}

TEST(ParseTape, StringEncodingMatchesArray) {
  std::string text;
  for (const auto& l : kFragment) text += l + "\n";
  EXPECT_EQ(parse_tape_text(text), parse_tape(kFragment));
}

TEST(SerializeTape, SpecExamples) {
  EXPECT_TRUE(serialize_tape({}).empty());
  Tape one;
  one.events.push_back({0, SetLookEvent{-0.004, 0}});
  EXPECT_EQ(serialize_tape(one), std::vector<std::string>{"0 set_look (-0.004, 0)"});
}

TEST(SerializeTape, SampleCanonicalForm) {
  const auto lines = serialize_tape(parse_tape(kFragment));
  const std::vector<std::string> expected{
      "0 set_look (-0.004, 0)",
      "1 set_look (-0.044, -0.042)",
      "2 action step_backward",
      "3 pos_change (-0.10159854456559483, 63, 0.014814775657966633)",
      "4 action select_and_place_block 50 1 63 0",
      "5 block_change (1, 63, 0, 0, 50)",
  };
  EXPECT_EQ(lines, expected);
  EXPECT_EQ(serialize_tape(parse_tape(lines)), expected);
}

TEST(TapeProperty, ParseSerializeRoundTripOnRandomTapes) {
  std::mt19937 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto t = random_tape(rng);
    const auto lines = serialize_tape(t);
    const auto back = parse_tape(lines);
    ASSERT_EQ(back, t) << "tape " << i;
    ASSERT_EQ(serialize_tape(back), lines);
  }
}

TEST(Replay, EmptyTapeKeepsInitialState) {
  const auto s = spawn_state({});
  EXPECT_EQ(replay({}, s), s);
}

TEST(Replay, SampleFragmentPlacesYellowBlock) {
  const auto s = replay(parse_tape(kFragment), spawn_state({}));
  EXPECT_EQ(grid_to_json(s.grid), nlohmann::json::parse("[[1,63,0,50]]"));
  EXPECT_DOUBLE_EQ(s.avatar.pitch, -0.044);
  EXPECT_DOUBLE_EQ(s.avatar.pos.z, 0.014814775657966633);
}

TEST(Replay, ContradictedPlacementDiverges) {
  const std::vector<std::string> lines{"4 action select_and_place_block 50 1 63 0", "5 block_change (1, 63, 0, 0, 57)"};
  try {
    replay(parse_tape(lines), spawn_state({}));
    FAIL() << "expected ReplayDivergence";
  } catch (const ReplayDivergence& e) {
    EXPECT_EQ(e.step(), 4u);
  }
}

TEST(Replay, UnknownActionIsNoOpWithWarning) {
  const auto r = replay_detailed(parse_tape(std::vector<std::string>{"0 action wave 1"}), spawn_state({}));
  EXPECT_EQ(r.state, spawn_state({}));
  ASSERT_EQ(r.warnings.size(), 1u);
}

TEST(Replay, StrictModeChecksPositions) {
  const auto t = parse_tape(std::vector<std::string>{"0 action move_east", "1 pos_change (0.7, 63, 0)"});
  EXPECT_NO_THROW(replay(t, spawn_state({})));
  ReplayOptions strict;
  strict.strict_positions = true;
  EXPECT_THROW(replay(t, spawn_state({}), strict), ReplayDivergence);
  const auto ok = parse_tape(std::vector<std::string>{"0 action move_east", "1 pos_change (0.5, 63, 0)"});
  EXPECT_NO_THROW(replay(ok, spawn_state({}), strict));
}

TEST(TapeProperty, BlockChangeOnlyTapesApplyInOrder) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> coord(-5, 5);
  std::uniform_int_distribution<int> y(0, 8);
  std::uniform_int_distribution<std::size_t> pick(0, oracle::kIds.size() - 1);
  for (int i = 0; i < 200; ++i) {
    BlockGrid expected;
    Tape t;
    for (std::uint64_t step = 0; step < 20; ++step) {
      const Coord c{coord(rng), y(rng), coord(rng)};
      const BlockId old_id = expected.at(c).value_or(kAir);
      BlockId new_id = old_id == kAir || pick(rng) % 2 ? oracle::kIds[pick(rng)] : kAir;
      if (new_id == old_id) new_id = kAir;
      t.events.push_back({step, BlockChangeEvent{to_world(c), old_id, new_id}});
      if (new_id == kAir) {
        expected.erase(c);
      } else {
        expected.set(c, new_id);
      }
    }
    ASSERT_EQ(replay(t, spawn_state({})).grid, expected);
  }
}


TEST(RecordReplay, RecordedSessionsReplayExactly) {
  std::mt19937 rng(17);
  for (int i = 0; i < 300; ++i) {
    const auto start = spawn_state(oracle::random_grid(rng, -2, -2, 5, 2, 0.2));
    const auto [t, end] = random_session(rng, start);
    ReplayOptions strict;
    strict.strict_positions = true;
    const auto replayed = replay(t, start, strict);
    ASSERT_EQ(replayed.grid, end.grid);
    ASSERT_EQ(replayed.avatar.pos, end.avatar.pos);
    // Prefixes replay to prefix-consistent grids.
    Tape prefix;
    WorldState running = start;
    for (const auto& e : t.events) {
      prefix.events.push_back(e);
      if (std::holds_alternative<BlockChangeEvent>(e.kind)) {
        const auto& bc = std::get<BlockChangeEvent>(e.kind);
        if (bc.new_id == kAir) {
          running.grid.erase(to_build(bc.at));
        } else {
          running.grid.set(to_build(bc.at), bc.new_id);
        }
        ASSERT_EQ(replay(prefix, start).grid, running.grid);
      }
    }
  }
}

TEST(VerifyBuilderRecord, SelfConsistentRecordsVerifyAndAnySingleCellTamperFails) {
  std::mt19937 rng(23);
  std::uniform_int_distribution<int> coord(-5, 5);
  std::uniform_int_distribution<int> yy(0, 8);
  int tampered = 0;
  for (int i = 0; i < 200; ++i) {
    const auto start = spawn_state(oracle::random_grid(rng, -2, -2, 5, 2, 0.2));
    const auto [t, end] = random_session(rng, start);
    dataset::BuilderRecord r;
    r.game_id = 1;
    r.step_id = 2;
    r.tape = t;
    r.world_ending_state = end.grid;
    ASSERT_TRUE(dataset::verify_builder_record(r, start));

    // Add, remove or recolor exactly one cell.
    auto bad = r;
    const Coord c{coord(rng), yy(rng), coord(rng)};
    if (auto id = bad.world_ending_state.at(c)) {
      if (i % 2) {
        bad.world_ending_state.erase(c);
      } else {
        bad.world_ending_state.set(c, *id == 50 ? 57 : 50);
      }
    } else {
      bad.world_ending_state.set(c, 59);
    }
    const auto v = dataset::verify_builder_record_detailed(bad, start);
    ASSERT_FALSE(v.consistent);
    ASSERT_EQ(v.mismatch.size(), 1u);
    EXPECT_EQ(v.mismatch.begin()->first, c);
    ++tampered;
  }
  EXPECT_EQ(tampered, 200);
}

TEST(VerifyBuilderRecord, SampleRecordVerifiesOnceCompleted) {
  auto record = dataset::load_records(oracle::fixture("sample_builder.json"), dataset::Role::Builder).builder.at(0);
  EXPECT_TRUE(record.tape.elided);
  // The shortened tape alone does not reach the recorded ending state.
  EXPECT_FALSE(dataset::verify_builder_record(record));

  // Complete the elided part: recolor the yellow block blue and build the
  // other four blocks, stepping north once to reach (0, 0, -3).
  const auto after_fragment = replay(record.tape, spawn_state({}));
  const std::vector<BuildAction> rest{
      BreakBlock{{1, 0, 0}},          PlaceBlock{{1, 0, 0}, 57},      Move{MoveDir::North},
      PlaceBlock{{0, 0, -3}, 57},     PlaceBlock{{-1, 0, -2}, 57},    PlaceBlock{{-1, 0, 1}, 50},
      PlaceBlock{{-2, 0, 1}, 50},
  };
  const auto tail = record_tape(after_fragment, rest, record.tape.events.back().step + 1);
  record.tape.events.insert(record.tape.events.end(), tail.events.begin(), tail.events.end());
  EXPECT_TRUE(dataset::verify_builder_record(record));
}
