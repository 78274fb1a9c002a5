#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "iglu/dataset.hpp"
#include "oracles.hpp"

using namespace iglu;
using namespace iglu::dataset;
using nlohmann::json;

namespace {

ArchitectRecord instr(std::int64_t game, std::int64_t step, std::string command,
                      std::optional<std::string> annotator = std::nullopt) {
  ArchitectRecord a;
  a.game_id = game;
  a.step_id = step;
  a.command = std::move(command);
  a.annotator_id = std::move(annotator);
  return a;
}

BuilderRecord build(std::int64_t game, std::int64_t step, std::optional<std::string> question = std::nullopt) {
  BuilderRecord b;
  b.game_id = game;
  b.step_id = step;
  b.clarification_question = std::move(question);
  return b;
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto p = std::filesystem::temp_directory_path() / ("iglu_test_dataset_" + name);
  std::ofstream(p) << content;
  return p;
}

}  // namespace

TEST(LoadRecords, SampleRecord) {
  const auto c = load_records(oracle::fixture("sample_builder.json"), Role::Builder);
  ASSERT_EQ(c.builder.size(), 1u);
  const auto& r = c.builder[0];
  EXPECT_EQ(r.game_id, 19);
  EXPECT_EQ(r.step_id, 1);
  EXPECT_FALSE(r.clarification_question);
  EXPECT_EQ(r.world_ending_state.size(), 5u);
  EXPECT_EQ(r.world_ending_state.at({1, 0, 0}), BlockId{57});
}

TEST(LoadRecords, EmptyFileIsEmptyCorpus) {
  EXPECT_TRUE(load_records(oracle::fixture("empty.json")).empty());
  EXPECT_TRUE(load_records(temp_file("blank.json", "  \n")).empty());
}

TEST(LoadRecords, MissingCommandIsSchemaError) {
  const auto p = temp_file("missing_command.json", R"([{"gameId": 1, "stepId": 1, "command": "place five blocks in a row"},
                                                      {"gameId": 1, "stepId": 3}])");
  try {
    load_records(p, Role::Architect);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.issue().index, 1u);
    EXPECT_EQ(e.issue().field, "command");
  }
}

TEST(LoadRecords, ScanReportsEveryMalformedEntry) {
  const auto p = temp_file("mixed.ndjson",
                           "{\"gameId\": 1, \"stepId\": 1, \"command\": \"ok then build it\"}\n"
                           "{\"gameId\": -1, \"stepId\": 1, \"command\": \"x\"}\n"
                           "{\"gameId\": 1}\n"
                           "{\"gameId\": 1, \"stepId\": 2, \"worldEndingState\": [], \"tape\": [\"0 bogus\"]}\n");
  const auto r = scan_records(p);
  EXPECT_EQ(r.corpus.architect.size(), 1u);
  ASSERT_EQ(r.issues.size(), 3u);
  EXPECT_EQ(r.issues[0].index, 1u);
  EXPECT_EQ(r.issues[1].index, 2u);
  EXPECT_EQ(r.issues[2].index, 3u);
  EXPECT_EQ(r.issues[2].field, "tape");
}

TEST(LoadRecords, MissingFileIsIoError) {
  EXPECT_THROW(load_records("/nonexistent/iglu/records.json"), IoError);
}

TEST(LoadRecords, PerspectiveAcceptsTop) {
  const auto p = temp_file("top.json", R"({"gameId": 2, "stepId": 0, "avatarInfo": {"perspective": "Top"},
                                           "command": "look down at the grid"})");
  EXPECT_EQ(load_records(p).architect.at(0).perspective, Perspective::Top);
}

TEST(LoadRecords, SerializeLoadRoundTrip) {
  const auto c = load_records(oracle::fixture("stats_corpus.json"));
  json arr = json::array();
  for (const auto& a : c.architect) arr.push_back(to_json(a));
  for (const auto& b : c.builder) arr.push_back(to_json(b));
  const auto back = load_records(temp_file("roundtrip.json", arr.dump()));
  EXPECT_EQ(back, c);
}

TEST(Tokenize, StripsEdgePunctuation) {
  EXPECT_EQ(tokenize("Build a blue tower, please."), (std::vector<std::string>{"Build", "a", "blue", "tower", "please"}));
  EXPECT_EQ(word_count("  -- x-ray  !! "), 1u);
  EXPECT_EQ(word_count(""), 0u);
}

TEST(Clean, ReferenceExamples) {
  Corpus c;
  c.architect.push_back(instr(1, 1, "place block"));
  c.architect.push_back(instr(2, 1, "put the block on the ground please"));
  c.architect.push_back(
      instr(3, 1, "place three green blocks in a row along the east edge and then stack one red block on top of them"));
  auto unclear = build(2, 2);
  unclear.ambiguous = true;
  c.builder.push_back(unclear);
  const auto r = clean(c);
  ASSERT_EQ(r.rejected.size(), 3u);
  EXPECT_EQ(r.rejected[0].reason, RejectReason::ShortInstruction);
  EXPECT_EQ(r.rejected[0].game_id, 1);
  EXPECT_EQ(r.rejected[1].reason, RejectReason::MissingQuestion);
  EXPECT_EQ(r.rejected[1].role, Role::Architect);
  EXPECT_EQ(r.rejected[2].reason, RejectReason::MissingQuestion);
  EXPECT_EQ(r.rejected[2].role, Role::Builder);
  ASSERT_EQ(r.kept.architect.size(), 1u);
  EXPECT_EQ(word_count(r.kept.architect[0].command), 21u);
}

TEST(Clean, RepeatingAnnotatorIsDroppedEntirely) {
  Corpus c;
  for (int i = 0; i < 3; ++i) c.architect.push_back(instr(10 + i, 1, "build the same thing as before", "lazy"));
  c.architect.push_back(instr(20, 1, "a different and perfectly fine instruction", "lazy"));
  c.architect.push_back(instr(21, 1, "build the same thing as before", "diligent"));
  auto b = build(20, 2);
  b.annotator_id = "lazy";
  c.builder.push_back(b);
  const auto r = clean(c);
  EXPECT_EQ(r.rejected.size(), 5u);
  for (const auto& rej : r.rejected) EXPECT_EQ(rej.reason, RejectReason::RepeatedInstructions);
  ASSERT_EQ(r.kept.architect.size(), 1u);
  EXPECT_EQ(r.kept.architect[0].annotator_id, "diligent");

  CleanConfig loose;
  loose.repetition_threshold = 4;
  EXPECT_TRUE(clean(c, loose).rejected.empty());
}

TEST(Clean, IdempotentOnRandomCorpora) {
  std::mt19937 rng(3);
  const std::vector<std::string> commands{"go", "place two blocks", "put one red block at the center",
                                          "build a tall tower of blue blocks now", "remove it"};
  for (int round = 0; round < 100; ++round) {
    Corpus c;
    std::uniform_int_distribution<int> pick(0, 4);
    for (int g = 0; g < 6; ++g) {
      for (int s = 1; s <= 4; s += 2) {
        c.architect.push_back(instr(g, s, commands[pick(rng)], "ann" + std::to_string(pick(rng))));
        auto b = build(g, s + 1, pick(rng) == 0 ? std::optional<std::string>("which one?") : std::nullopt);
        if (pick(rng) == 1) b.ambiguous = true;
        c.builder.push_back(b);
      }
    }
    const auto once = clean(c);
    const auto twice = clean(once.kept);
    ASSERT_EQ(twice.kept, once.kept);
    ASSERT_TRUE(twice.rejected.empty());
    for (const auto& [key, b] : pair_instructions(once.kept)) {
      if (b->is_ambiguous()) {
        ASSERT_TRUE(b->clarification_question.has_value());
      }
    }
  }
}

TEST(ComputeStats, HandCountedFixture) {
  const auto c = load_records(oracle::fixture("stats_corpus.json"));
  ASSERT_TRUE(clean(c).rejected.empty());
  const auto s = compute_stats(c);
  EXPECT_EQ(s.target_structures, 2u);
  EXPECT_EQ(s.completed_games, 3u);
  EXPECT_EQ(s.instruction_count, 4u);
  EXPECT_EQ(s.clarifying_question_count, 2u);
  EXPECT_EQ(s.clear_count, 2u);
  EXPECT_EQ(s.ambiguous_count, 2u);
  EXPECT_EQ(s.total_split, (SplitCounts{2, 2}));
  EXPECT_EQ(s.clear_split, (SplitCounts{1, 1}));
  EXPECT_EQ(s.ambiguous_split, (SplitCounts{1, 1}));
  // 7, 7, 8 and 8 words; questions of 7 and 1 words.
  EXPECT_NEAR(s.avg_instruction_words, 7.5, 0.01);
  EXPECT_NEAR(s.avg_question_words, 4.0, 0.01);
  EXPECT_NEAR(s.avg_turns_per_game, 8.0 / 3.0, 0.01);
  EXPECT_NEAR(s.avg_questions_per_game, 2.0 / 3.0, 0.01);
  // Games 1 and 2 last 10 and 30 minutes; game 3 has no timestamps.
  EXPECT_NEAR(s.median_game_duration_minutes, 20.0, 0.01);
  EXPECT_EQ(s.clear_count + s.ambiguous_count, s.instruction_count);
}

TEST(ComputeStats, TwoInstructionsOfFiveAndSevenWords) {
  const auto s = compute_stats(load_records(oracle::fixture("stats_two_instructions.ndjson")));
  EXPECT_EQ(s.instruction_count, 2u);
  EXPECT_NEAR(s.avg_instruction_words, 6.0, 0.01);
}

TEST(ComputeStats, EmptyCorpus) {
  const auto s = compute_stats(Corpus{});
  EXPECT_EQ(s.instruction_count, 0u);
  EXPECT_EQ(s.avg_instruction_words, 0.0);
  EXPECT_EQ(s.median_game_duration_minutes, 0.0);
}

TEST(ComputeStats, InvariantUnderReordering) {
  const auto c = load_records(oracle::fixture("stats_corpus.json"));
  const auto expected = to_json(compute_stats(c));
  std::mt19937 rng(9);
  for (int i = 0; i < 50; ++i) {
    auto shuffled = c;
    std::shuffle(shuffled.architect.begin(), shuffled.architect.end(), rng);
    std::shuffle(shuffled.builder.begin(), shuffled.builder.end(), rng);
    ASSERT_EQ(to_json(compute_stats(shuffled)), expected);
  }
}

TEST(ComputeStats, TableRendersBothBlocks) {
  const auto table = render_stats_table(compute_stats(load_records(oracle::fixture("stats_corpus.json"))));
  EXPECT_NE(table.find("Avg. Len of Instructions"), std::string::npos);
  EXPECT_NE(table.find("7.50 words"), std::string::npos);
  EXPECT_NE(table.find("20.00 mins"), std::string::npos);
  EXPECT_NE(table.find("Ambiguous"), std::string::npos);
}

TEST(Categorize, ReferenceExamples) {
  EXPECT_EQ(categorize_question("Which color blocks?"), CQCategory::Color);
  EXPECT_EQ(categorize_question("Which two purple blocks need to be destroyed?"), CQCategory::IdentifyBlocks);
  EXPECT_EQ(categorize_question("hmm ok"), CQCategory::Other);
  EXPECT_EQ(categorize_question("How many blocks should be placed?"), CQCategory::NumberOfBlocks);
  EXPECT_EQ(categorize_question("Should the row face north or south?"), CQCategory::DirectionOrientation);
}

TEST(Categorize, FamilyOrderDecidesTies) {
  // Mentions colour, a count and a side: color wins.
  EXPECT_EQ(categorize_question("How many blocks of which colour on the left?"), CQCategory::Color);
  EXPECT_EQ(categorize_question("How many on the left?"), CQCategory::NumberOfBlocks);
}

TEST(Categorize, ShippedKeywordFileMatchesDefaults) {
  const auto shipped = QuestionCategorizer::load(std::string(IGLU_CONFIG_DIR) + "/cq_keywords.json");
  EXPECT_EQ(shipped.to_json(), QuestionCategorizer::defaults().to_json());
  const auto custom = QuestionCategorizer::from_json(json::parse(R"({"identify": ["purple"]})"));
  EXPECT_EQ(custom.categorize("the purple one?"), CQCategory::IdentifyBlocks);
  EXPECT_EQ(custom.categorize("what color?"), CQCategory::Other);
}

TEST(StartingState, LatestEarlierBuilderStep) {
  const auto c = load_records(oracle::fixture("stats_corpus.json"));
  const auto& step4 = c.builder[1];
  ASSERT_EQ(step4.step_id, 4);
  EXPECT_EQ(starting_state(c, step4).grid.at({1, 0, 0}), BlockId{60});
  EXPECT_TRUE(starting_state(c, c.builder[0]).grid.empty());
  EXPECT_TRUE(verify_builder_record(c.builder[0]));
  EXPECT_TRUE(verify_builder_record(step4, starting_state(c, step4)));
}
