#include <gtest/gtest.h>

#include <random>

#include "iglu/taxonomy.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace iglu;
using namespace iglu::taxonomy;

using oracle::box;
using oracle::cells;
using oracle::hand_built;
using oracle::merge;
using oracle::rotate;

TEST(Taxonomy, HandBuiltStructures) {
  const auto cases = hand_built();
  ASSERT_EQ(cases.size(), 12u);
  for (const auto& c : cases) EXPECT_EQ(classify(c.grid), c.expected) << c.name;
}

TEST(Taxonomy, InvariantUnderTranslationAndRotation) {
  std::mt19937 rng(31);
  for (const auto& c : hand_built()) {
    auto g = c.grid;
    for (int turn = 0; turn < 4; ++turn) {
      g = rotate(g);
      EXPECT_EQ(classify(g), c.expected) << c.name << " turn " << turn;
    }
    for (int dx = -2; dx <= 2; ++dx) {
      for (int dz = -2; dz <= 2; ++dz) EXPECT_EQ(classify(oracle::translate(c.grid, dx, dz)), c.expected) << c.name;
    }
  }
}

TEST(TaxonomyProperty, RandomStructuresInvariantUnderRigidMoves) {
  std::mt19937 rng(37);
  std::uniform_int_distribution<int> shift(-2, 2);
  for (int i = 0; i < 500; ++i) {
    auto g = oracle::random_grid(rng, -2, -2, 5, 6, 0.15);
    if (g.empty()) continue;
    const auto expected = classify(g);
    ASSERT_EQ(classify(rotate(g)), expected);
    ASSERT_EQ(classify(oracle::translate(g, shift(rng), shift(rng))), expected);
  }
}

TEST(Taxonomy, EmptyStructureThrows) {
  EXPECT_THROW(classify({}), EmptyStructure);
  EXPECT_THROW(is_flat({}), EmptyStructure);
}

TEST(Taxonomy, TallThresholdIsConfigurable) {
  const auto tower = box(0, 0, 0, 0, 3, 0);
  EXPECT_FALSE(is_tall(tower));
  EXPECT_TRUE(is_tall(tower, Options{3}));
  EXPECT_EQ(classify(box(0, 0, 0, 0, 8, 0)).names(), std::vector<std::string>{"tall"});
  EXPECT_EQ(classify(box(-1, 5, -1, 1, 7, 1)).names(), (std::vector<std::string>{"flying", "tricky", "tall"}));
}
