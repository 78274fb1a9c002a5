#pragma once

// Deterministic voxel world: the 11x11x9 build region, the builder avatar and
// the place/remove/move rules every other module replays or scores against.
//
// Coordinates are in the build frame unless a function says otherwise:
// x (east) and z (south) in [-5, 5], y (up) in [0, 8]. Recorded data uses the
// world frame where the ground layer sits at y = 63.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace iglu {

/// Block type id. 0 is air and is never stored in a grid.
using BlockId = std::uint16_t;
inline constexpr BlockId kAir = 0;

inline constexpr int kRegionHalfWidth = 5;
inline constexpr int kRegionHeight = 9;
inline constexpr int kWorldGroundY = 63;

inline constexpr double kReachRadius = 3.0;
inline constexpr double kStepLength = 0.5;
/// Walkable footprint: the build region plus a 2-unit margin.
inline constexpr double kWalkableHalfWidth = kRegionHalfWidth + 2.0;

struct Coord {
  int x = 0;
  int y = 0;
  int z = 0;

  friend auto operator<=>(const Coord&, const Coord&) = default;
};

std::string to_string(const Coord& c);

/// True iff c lies in the 11x11x9 build region.
constexpr bool in_bounds(const Coord& c) {
  return c.x >= -kRegionHalfWidth && c.x <= kRegionHalfWidth && c.z >= -kRegionHalfWidth &&
         c.z <= kRegionHalfWidth && c.y >= 0 && c.y < kRegionHeight;
}

constexpr Coord to_world(const Coord& c) { return {c.x, c.y + kWorldGroundY, c.z}; }
constexpr Coord to_build(const Coord& c) { return {c.x, c.y - kWorldGroundY, c.z}; }

enum class VoxelErrc {
  OutOfBounds,
  Occupied,
  OutOfReach,
  NotPresent,
  AvatarCollision,
  InvalidBlock,
};

std::string_view to_string(VoxelErrc code);

class VoxelError : public std::runtime_error {
 public:
  VoxelError(VoxelErrc code, const std::string& detail);
  VoxelErrc code() const noexcept { return code_; }

 private:
  VoxelErrc code_;
};

/// Sparse occupancy of the build region. Absent cells are air.
class BlockGrid {
 public:
  using Map = std::map<Coord, BlockId>;
  using const_iterator = Map::const_iterator;

  BlockGrid() = default;

  /// Throws VoxelError(OutOfBounds | InvalidBlock).
  void set(const Coord& c, BlockId id);
  bool erase(const Coord& c);

  std::optional<BlockId> at(const Coord& c) const;
  bool contains(const Coord& c) const { return cells_.count(c) != 0; }
  std::size_t size() const noexcept { return cells_.size(); }
  bool empty() const noexcept { return cells_.empty(); }

  const_iterator begin() const noexcept { return cells_.begin(); }
  const_iterator end() const noexcept { return cells_.end(); }

  /// Highest occupied y in column (x, z), if any.
  std::optional<int> column_top(int x, int z) const;

  friend bool operator==(const BlockGrid&, const BlockGrid&) = default;

 private:
  Map cells_;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

double distance(const Vec3& a, const Vec3& b);

struct Avatar {
  Vec3 pos;
  double pitch = 0.0;
  double yaw = 0.0;

  friend bool operator==(const Avatar&, const Avatar&) = default;
};

/// Maps yaw into [-180, 180).
double normalize_yaw(double yaw);
double clamp_pitch(double pitch);

enum class MoveDir {
  Forward,
  Backward,
  Left,
  Right,
  North,
  South,
  East,
  West,
};

std::string_view to_string(MoveDir dir);
std::optional<MoveDir> move_dir_from_string(std::string_view name);

struct Move {
  MoveDir dir = MoveDir::Forward;
  friend bool operator==(const Move&, const Move&) = default;
};
struct SetLook {
  double pitch = 0.0;
  double yaw = 0.0;
  friend bool operator==(const SetLook&, const SetLook&) = default;
};
struct Jump {
  friend bool operator==(const Jump&, const Jump&) = default;
};
struct PlaceBlock {
  Coord at;
  BlockId id = kAir;
  friend bool operator==(const PlaceBlock&, const PlaceBlock&) = default;
};
struct BreakBlock {
  Coord at;
  friend bool operator==(const BreakBlock&, const BreakBlock&) = default;
};

using BuildAction = std::variant<Move, SetLook, Jump, PlaceBlock, BreakBlock>;

struct WorldState {
  BlockGrid grid;
  Avatar avatar;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

/// Standing height for an avatar at horizontal position (x, z): one above the
/// highest block of its column, or 0 on an empty column or outside the region.
double settle_height(const BlockGrid& grid, double x, double z);

/// Cell containing the avatar's feet.
Coord avatar_cell(const Avatar& avatar);

/// An avatar is airborne when it is a full block above its standing height.
bool is_airborne(const WorldState& s);

/// Point reach is measured from. Jumping does not extend reach.
Vec3 reach_origin(const WorldState& s);

bool within_reach(const WorldState& s, const Coord& c);

/// State with the avatar settled on column (0, 0).
WorldState spawn_state(BlockGrid grid);

/// Avatar is unchanged. Throws VoxelError(InvalidBlock | OutOfBounds | Occupied |
/// AvatarCollision | OutOfReach).
WorldState place_block(const WorldState& s, const Coord& c, BlockId id);

/// Throws VoxelError(OutOfBounds | NotPresent | OutOfReach).
WorldState remove_block(const WorldState& s, const Coord& c);

/// Deterministic successor. Moves clamp to the walkable footprint instead of
/// failing; block actions propagate VoxelError. The avatar settles after every
/// action except Jump, which leaves it one block up until the next action.
WorldState apply_action(const WorldState& s, const BuildAction& action);

// ---------------------------------------------------------------------------
// Grid differences

enum class DeltaTag { Add, Remove };

struct DeltaEntry {
  DeltaTag tag = DeltaTag::Add;
  BlockId id = kAir;
  friend bool operator==(const DeltaEntry&, const DeltaEntry&) = default;
};

/// Signed modifications between two grids; at most one entry per coordinate.
class GridDelta {
 public:
  using Map = std::map<Coord, DeltaEntry>;

  void add(const Coord& c, BlockId id) { entries_[c] = {DeltaTag::Add, id}; }
  void remove(const Coord& c, BlockId old_id) { entries_[c] = {DeltaTag::Remove, old_id}; }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  Map::const_iterator begin() const noexcept { return entries_.begin(); }
  Map::const_iterator end() const noexcept { return entries_.end(); }
  const Map& entries() const noexcept { return entries_; }

  friend bool operator==(const GridDelta&, const GridDelta&) = default;

 private:
  Map entries_;
};

/// Add(c, b) for new or recolored cells of g, Remove(c, old) for cells of g0
/// missing from g.
GridDelta diff(const BlockGrid& g0, const BlockGrid& g);

/// Inverse of diff: apply_delta(g0, diff(g0, g)) == g.
BlockGrid apply_delta(const BlockGrid& g0, const GridDelta& d);

}  // namespace iglu
