#include <gtest/gtest.h>

#include <random>

#include "iglu/grid_io.hpp"
#include "oracles.hpp"

using namespace iglu;
using nlohmann::json;

TEST(GridJson, QuadruplesAreWorldFrame) {
  BlockGrid g;
  g.set({1, 0, 0}, 50);
  g.set({-2, 3, 4}, 57);
  const auto j = grid_to_json(g);
  EXPECT_EQ(j, json::parse("[[-2,66,4,57],[1,63,0,50]]"));
  EXPECT_EQ(grid_from_json(j), g);
}

TEST(GridJson, AcceptsWorldEndingStateObject) {
  const auto g = grid_from_json(json::parse(R"({"blocks": [[-2, 63, 1, 50], [0, 63, -3, 57]]})"));
  EXPECT_EQ(g.at({-2, 0, 1}), BlockId{50});
  EXPECT_EQ(g.at({0, 0, -3}), BlockId{57});
}

TEST(GridJson, RejectsMalformedEntries) {
  EXPECT_THROW(grid_from_json(json::parse("[[0,63,0]]")), std::runtime_error);
  EXPECT_THROW(grid_from_json(json::parse("[[0,63,0,0]]")), VoxelError);
  EXPECT_THROW(grid_from_json(json::parse("[[0,80,0,50]]")), VoxelError);
  EXPECT_THROW(grid_from_json(json::parse("[[0,63,0,50],[0,63,0,57]]")), std::runtime_error);
  EXPECT_THROW(grid_from_json(json::parse("[[0.5,63,0,50]]")), std::runtime_error);
}

TEST(GridJson, RoundTripOnRandomGrids) {
  std::mt19937 rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto g = oracle::random_grid(rng, -5, -5, 11, 9, 0.1);
    ASSERT_EQ(grid_from_json(json::parse(grid_to_json(g).dump())), g);
  }
}

TEST(TrailingCommas, StrippedOutsideStrings) {
  EXPECT_EQ(strip_trailing_commas("[1, 2, ]"), "[1, 2 ]");
  EXPECT_EQ(strip_trailing_commas("{\"a\": [1,\n],\n}"), "{\"a\": [1\n]\n}");
  EXPECT_EQ(strip_trailing_commas(R"(["a,]", 1])"), R"(["a,]", 1])");
  EXPECT_EQ(strip_trailing_commas(R"(["x\",]",])"), R"(["x\",]"])");
}

TEST(Palette, DefaultsAndLookup) {
  const auto p = Palette::defaults();
  EXPECT_EQ(p.colors().size(), 6u);
  EXPECT_EQ(p.id_of("yellow"), BlockId{50});
  EXPECT_EQ(p.id_of("blue"), BlockId{57});
  EXPECT_EQ(p.name_of(50), "yellow");
  EXPECT_FALSE(p.id_of("pink"));
  EXPECT_FALSE(p.contains(1));
}

TEST(Palette, ShippedConfigMatchesDefaults) {
  EXPECT_EQ(Palette::load(std::string(IGLU_CONFIG_DIR) + "/palette.json").colors(), Palette::defaults().colors());
}

TEST(Palette, RejectsBadIds) {
  EXPECT_THROW(Palette::from_json(json::parse(R"({"red": 0})")), std::runtime_error);
  EXPECT_THROW(Palette::from_json(json::parse(R"({"red": "60"})")), std::runtime_error);
  EXPECT_THROW(Palette::from_json(json::object()), std::runtime_error);
}
