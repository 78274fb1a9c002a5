#include "iglu/taxonomy.hpp"

#include <array>
#include <set>
#include <vector>

namespace iglu::taxonomy {

namespace {

constexpr std::array<Coord, 6> kFaces{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};

Coord offset(const Coord& c, const Coord& d) { return {c.x + d.x, c.y + d.y, c.z + d.z}; }

void require_blocks(const BlockGrid& g) {
  if (g.empty()) throw EmptyStructure();
}

}  // namespace

std::vector<std::string> StructureLabels::names() const {
  std::vector<std::string> out;
  if (flat) out.emplace_back("flat");
  if (flying) out.emplace_back("flying");
  if (diagonal) out.emplace_back("diagonal");
  if (tricky) out.emplace_back("tricky");
  if (tall) out.emplace_back("tall");
  return out;
}

bool is_flat(const BlockGrid& g) {
  require_blocks(g);
  for (const auto& [c, _] : g) {
    if (c.y != 0) return false;
  }
  return true;
}

bool is_flying(const BlockGrid& g) {
  require_blocks(g);
  std::set<Coord> seen;
  for (const auto& [start, _] : g) {
    if (seen.count(start)) continue;
    bool grounded = false;
    std::vector<Coord> stack{start};
    seen.insert(start);
    while (!stack.empty()) {
      const Coord c = stack.back();
      stack.pop_back();
      grounded = grounded || c.y == 0;
      for (const auto& d : kFaces) {
        const Coord n = offset(c, d);
        if (g.contains(n) && seen.insert(n).second) stack.push_back(n);
      }
    }
    if (!grounded) return true;
  }
  return false;
}

bool is_diagonal(const BlockGrid& g) {
  require_blocks(g);
  for (const auto& [c, _] : g) {
    bool face = false;
    for (const auto& d : kFaces) face = face || g.contains(offset(c, d));
    if (face) continue;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          if ((dx || dy || dz) && g.contains({c.x + dx, c.y + dy, c.z + dz})) return true;
        }
      }
    }
  }
  return false;
}

bool is_tall(const BlockGrid& g, const Options& options) {
  require_blocks(g);
  for (const auto& [c, _] : g) {
    if (c.y >= options.tall_threshold) return true;
  }
  return false;
}

bool has_hidden_blocks(const BlockGrid& g) {
  require_blocks(g);
  for (const auto& [c, _] : g) {
    bool covered = true;
    for (const auto& d : kFaces) {
      const Coord n = offset(c, d);
      covered = covered && (g.contains(n) || n.y < 0);
    }
    if (covered) return true;
  }
  return false;
}

StructureLabels classify(const BlockGrid& g, const Options& options) {
  return {is_flat(g), is_flying(g), is_diagonal(g), has_hidden_blocks(g), is_tall(g, options)};
}

}  // namespace iglu::taxonomy
