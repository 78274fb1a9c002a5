#pragma once

#include <random>

#include "iglu/voxel.hpp"

namespace bench {

inline iglu::BlockGrid random_grid(std::mt19937& rng, int half, int height, double fill) {
  static constexpr iglu::BlockId kIds[] = {47, 50, 56, 57, 59, 60};
  std::bernoulli_distribution on(fill);
  std::uniform_int_distribution<std::size_t> color(0, 5);
  iglu::BlockGrid g;
  for (int x = -half; x <= half; ++x)
    for (int z = -half; z <= half; ++z)
      for (int y = 0; y < height; ++y)
        if (on(rng)) g.set({x, y, z}, kIds[color(rng)]);
  return g;
}

}  // namespace bench
