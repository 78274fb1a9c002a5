#include "iglu/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace iglu {

namespace {

int nearest_cell(double v) { return static_cast<int>(std::floor(v + 0.5)); }

struct Horizontal {
  double dx;
  double dz;
};

// Yaw 0 faces south (+z); yaw 90 faces west (-x).
Horizontal direction_of(MoveDir dir, double yaw_degrees) {
  const double yaw = yaw_degrees * std::numbers::pi / 180.0;
  const Horizontal forward{-std::sin(yaw), std::cos(yaw)};
  const Horizontal right{-std::cos(yaw), -std::sin(yaw)};
  switch (dir) {
    case MoveDir::Forward: return forward;
    case MoveDir::Backward: return {-forward.dx, -forward.dz};
    case MoveDir::Right: return right;
    case MoveDir::Left: return {-right.dx, -right.dz};
    case MoveDir::North: return {0.0, -1.0};
    case MoveDir::South: return {0.0, 1.0};
    case MoveDir::East: return {1.0, 0.0};
    case MoveDir::West: return {-1.0, 0.0};
  }
  return {0.0, 0.0};
}

Vec3 block_center(const Coord& c) {
  return {static_cast<double>(c.x), static_cast<double>(c.y), static_cast<double>(c.z)};
}

void settle(WorldState& s) {
  s.avatar.pos.y = settle_height(s.grid, s.avatar.pos.x, s.avatar.pos.z);
}

void check_reach(const WorldState& s, const Coord& c) {
  if (!within_reach(s, c)) {
    throw VoxelError(VoxelErrc::OutOfReach, "block " + to_string(c) + " is beyond the placement radius");
  }
}

}  // namespace

std::string to_string(const Coord& c) {
  return "(" + std::to_string(c.x) + ", " + std::to_string(c.y) + ", " + std::to_string(c.z) + ")";
}

std::string_view to_string(VoxelErrc code) {
  switch (code) {
    case VoxelErrc::OutOfBounds: return "OutOfBounds";
    case VoxelErrc::Occupied: return "Occupied";
    case VoxelErrc::OutOfReach: return "OutOfReach";
    case VoxelErrc::NotPresent: return "NotPresent";
    case VoxelErrc::AvatarCollision: return "AvatarCollision";
    case VoxelErrc::InvalidBlock: return "InvalidBlock";
  }
  return "Unknown";
}

VoxelError::VoxelError(VoxelErrc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

void BlockGrid::set(const Coord& c, BlockId id) {
  if (id == kAir) {
    throw VoxelError(VoxelErrc::InvalidBlock, "block id 0 cannot be stored");
  }
  if (!in_bounds(c)) {
    throw VoxelError(VoxelErrc::OutOfBounds, to_string(c) + " is outside the build region");
  }
  cells_[c] = id;
}

bool BlockGrid::erase(const Coord& c) { return cells_.erase(c) != 0; }

std::optional<BlockId> BlockGrid::at(const Coord& c) const {
  auto it = cells_.find(c);
  if (it == cells_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> BlockGrid::column_top(int x, int z) const {
  for (int y = kRegionHeight - 1; y >= 0; --y) {
    if (cells_.count(Coord{x, y, z}) != 0) return y;
  }
  return std::nullopt;
}

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double normalize_yaw(double yaw) {
  // In-range angles pass through untouched so recorded looks replay exactly.
  if (yaw >= -180.0 && yaw < 180.0) return yaw;
  double r = std::fmod(yaw, 360.0);  // exact
  if (r >= 180.0) r -= 360.0;
  if (r < -180.0) r += 360.0;
  return r;
}

double clamp_pitch(double pitch) { return std::clamp(pitch, -90.0, 90.0); }

std::string_view to_string(MoveDir dir) {
  switch (dir) {
    case MoveDir::Forward: return "step_forward";
    case MoveDir::Backward: return "step_backward";
    case MoveDir::Left: return "step_left";
    case MoveDir::Right: return "step_right";
    case MoveDir::North: return "move_north";
    case MoveDir::South: return "move_south";
    case MoveDir::East: return "move_east";
    case MoveDir::West: return "move_west";
  }
  return "unknown";
}

std::optional<MoveDir> move_dir_from_string(std::string_view name) {
  for (auto dir : {MoveDir::Forward, MoveDir::Backward, MoveDir::Left, MoveDir::Right, MoveDir::North,
                   MoveDir::South, MoveDir::East, MoveDir::West}) {
    if (to_string(dir) == name) return dir;
  }
  return std::nullopt;
}

double settle_height(const BlockGrid& grid, double x, double z) {
  const auto top = grid.column_top(nearest_cell(x), nearest_cell(z));
  return top ? static_cast<double>(*top + 1) : 0.0;
}

Coord avatar_cell(const Avatar& avatar) {
  return {nearest_cell(avatar.pos.x), nearest_cell(avatar.pos.y), nearest_cell(avatar.pos.z)};
}

bool is_airborne(const WorldState& s) {
  return s.avatar.pos.y >= settle_height(s.grid, s.avatar.pos.x, s.avatar.pos.z) + 0.5;
}

Vec3 reach_origin(const WorldState& s) {
  Vec3 origin = s.avatar.pos;
  if (is_airborne(s)) origin.y -= 1.0;
  return origin;
}

bool within_reach(const WorldState& s, const Coord& c) {
  return distance(reach_origin(s), block_center(c)) <= kReachRadius;
}

WorldState spawn_state(BlockGrid grid) {
  WorldState s{std::move(grid), {}};
  settle(s);
  return s;
}

WorldState place_block(const WorldState& s, const Coord& c, BlockId id) {
  if (id == kAir) {
    throw VoxelError(VoxelErrc::InvalidBlock, "cannot place block id 0");
  }
  if (!in_bounds(c)) {
    throw VoxelError(VoxelErrc::OutOfBounds, to_string(c) + " is outside the build region");
  }
  if (s.grid.contains(c)) {
    throw VoxelError(VoxelErrc::Occupied, to_string(c) + " already holds a block");
  }
  const Coord feet = avatar_cell(s.avatar);
  const Coord head{feet.x, feet.y + 1, feet.z};
  if (c == feet || c == head) {
    throw VoxelError(VoxelErrc::AvatarCollision, to_string(c) + " is occupied by the avatar");
  }
  check_reach(s, c);
  WorldState next = s;
  next.grid.set(c, id);
  return next;
}

WorldState remove_block(const WorldState& s, const Coord& c) {
  if (!in_bounds(c)) {
    throw VoxelError(VoxelErrc::OutOfBounds, to_string(c) + " is outside the build region");
  }
  if (!s.grid.contains(c)) {
    throw VoxelError(VoxelErrc::NotPresent, "no block at " + to_string(c));
  }
  check_reach(s, c);
  WorldState next = s;
  next.grid.erase(c);
  return next;
}

WorldState apply_action(const WorldState& s, const BuildAction& action) {
  WorldState next = std::visit(
      [&s](const auto& a) -> WorldState {
        using T = std::decay_t<decltype(a)>;
        WorldState out = s;
        if constexpr (std::is_same_v<T, Move>) {
          const auto step = direction_of(a.dir, s.avatar.yaw);
          out.avatar.pos.x = std::clamp(s.avatar.pos.x + kStepLength * step.dx, -kWalkableHalfWidth,
                                        kWalkableHalfWidth);
          out.avatar.pos.z = std::clamp(s.avatar.pos.z + kStepLength * step.dz, -kWalkableHalfWidth,
                                        kWalkableHalfWidth);
        } else if constexpr (std::is_same_v<T, SetLook>) {
          out.avatar.pitch = clamp_pitch(a.pitch);
          out.avatar.yaw = normalize_yaw(a.yaw);
        } else if constexpr (std::is_same_v<T, Jump>) {
          out.avatar.pos.y = settle_height(s.grid, s.avatar.pos.x, s.avatar.pos.z) + 1.0;
          return out;
        } else if constexpr (std::is_same_v<T, PlaceBlock>) {
          out = place_block(s, a.at, a.id);
        } else if constexpr (std::is_same_v<T, BreakBlock>) {
          out = remove_block(s, a.at);
        }
        settle(out);
        return out;
      },
      action);
  return next;
}

GridDelta diff(const BlockGrid& g0, const BlockGrid& g) {
  GridDelta d;
  for (const auto& [c, id] : g) {
    auto before = g0.at(c);
    if (!before || *before != id) d.add(c, id);
  }
  for (const auto& [c, id] : g0) {
    if (!g.contains(c)) d.remove(c, id);
  }
  return d;
}

BlockGrid apply_delta(const BlockGrid& g0, const GridDelta& d) {
  BlockGrid g = g0;
  for (const auto& [c, e] : d) {
    if (e.tag == DeltaTag::Add) {
      g.set(c, e.id);
    } else {
      g.erase(c);
    }
  }
  return g;
}

}  // namespace iglu
