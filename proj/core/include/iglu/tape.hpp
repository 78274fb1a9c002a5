#pragma once

// Line-oriented action tapes recorded for each builder turn:
//
//   0 set_look (-0.004, 0)
//   2 action step_backward
//   3 pos_change (-0.10159854456559483, 63, 0.014814775657966633)
//   4 action select_and_place_block 50 1 63 0
//   5 block_change (1, 63, 0, 0, 50)
//
// Positions and block coordinates on a tape are in the world frame.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "iglu/voxel.hpp"

namespace iglu::tape {

struct SetLookEvent {
  double pitch = 0.0;
  double yaw = 0.0;
  friend bool operator==(const SetLookEvent&, const SetLookEvent&) = default;
};

struct PosChangeEvent {
  Vec3 pos;
  friend bool operator==(const PosChangeEvent&, const PosChangeEvent&) = default;
};

struct ActionEvent {
  std::string name;
  std::vector<double> args;
  friend bool operator==(const ActionEvent&, const ActionEvent&) = default;
};

struct BlockChangeEvent {
  Coord at;
  BlockId old_id = kAir;
  BlockId new_id = kAir;
  friend bool operator==(const BlockChangeEvent&, const BlockChangeEvent&) = default;
};

using EventKind = std::variant<SetLookEvent, PosChangeEvent, ActionEvent, BlockChangeEvent>;

struct TapeEvent {
  std::uint64_t step = 0;
  EventKind kind;
  friend bool operator==(const TapeEvent&, const TapeEvent&) = default;
};

struct Tape {
  std::vector<TapeEvent> events;
  /// The source contained a "..." elision line.
  bool elided = false;

  friend bool operator==(const Tape& a, const Tape& b) { return a.events == b.events; }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& reason);
  /// 1-based line number in the parsed input.
  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class ReplayDivergence : public std::runtime_error {
 public:
  ReplayDivergence(std::uint64_t step, const std::string& detail);
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

/// One event per non-empty line. Repeated whitespace is tolerated; unknown
/// action names are accepted with any number of numeric arguments.
Tape parse_tape(std::span<const std::string> lines);
Tape parse_tape_text(std::string_view text);

/// Canonical single-spaced lines; shortest round-trip number formatting.
std::vector<std::string> serialize_tape(const Tape& t);
std::string format_event(const TapeEvent& e);

/// Action vocabulary understood by replay.
inline constexpr std::string_view kPlaceAction = "select_and_place_block";
inline constexpr std::string_view kBreakAction = "break_block";
inline constexpr std::string_view kJumpAction = "jump";

/// Build-frame action for a tape action, or nullopt for unknown names.
std::optional<BuildAction> to_build_action(const ActionEvent& a);

/// Tape spelling of an action. SetLook has no action form and is rejected.
ActionEvent to_action_event(const BuildAction& a);

struct ReplayOptions {
  /// Check recorded pos_change lines against simulated movement.
  bool strict_positions = false;
  double position_tolerance = 1e-6;
};

struct ReplayResult {
  WorldState state;
  std::vector<std::string> warnings;
};

/// Applies actions through voxel-core. Recorded set_look, pos_change and
/// block_change lines are authoritative; a block action whose simulated
/// effect disagrees with the block_change recorded after it raises
/// ReplayDivergence.
ReplayResult replay_detailed(const Tape& t, const WorldState& initial, const ReplayOptions& options = {});
WorldState replay(const Tape& t, const WorldState& initial, const ReplayOptions& options = {});

/// Runs actions through voxel-core and records them with their effects, the
/// way the collection tool writes a tape. Propagates VoxelError.
Tape record_tape(const WorldState& initial, std::span<const BuildAction> actions, std::uint64_t first_step = 0);

}  // namespace iglu::tape
