#pragma once

// Structure categories (flat, flying, diagonal, tricky, tall) derived from a
// target grid by geometric and buildability analysis. Labels are not mutually
// exclusive.

#include <stdexcept>
#include <string>
#include <vector>

#include "iglu/voxel.hpp"

namespace iglu::taxonomy {

class EmptyStructure : public std::invalid_argument {
 public:
  EmptyStructure() : std::invalid_argument("EmptyStructure: structure has no blocks") {}
};

/// A ground agent reaches y <= 3 with a 3.0 placement radius, so a block at
/// y >= 4 needs the agent raised.
inline constexpr int kDefaultTallThreshold = 4;

struct Options {
  int tall_threshold = kDefaultTallThreshold;
};

struct StructureLabels {
  bool flat = false;
  bool flying = false;
  bool diagonal = false;
  bool tricky = false;
  bool tall = false;

  /// Set labels in the order flat, flying, diagonal, tricky, tall.
  std::vector<std::string> names() const;
  friend bool operator==(const StructureLabels&, const StructureLabels&) = default;
};

/// Every block on the ground layer.
bool is_flat(const BlockGrid& g);
/// Some face-connected component never touches the ground layer.
bool is_flying(const BlockGrid& g);
/// Some block touches others only along an edge or corner.
bool is_diagonal(const BlockGrid& g);
bool is_tall(const BlockGrid& g, const Options& options = {});
/// Some block has all six faces covered (the ground covers the bottom face of
/// ground-layer blocks). Stands in for "tricky".
bool has_hidden_blocks(const BlockGrid& g);

/// All predicates throw EmptyStructure on an empty grid.
StructureLabels classify(const BlockGrid& g, const Options& options = {});

}  // namespace iglu::taxonomy
