#pragma once

// Game events and their newline-delimited JSON encoding.
//
// Server-to-client event messages are {"sessionId", "seq", "event"}. Control
// messages carry a "type" field instead (hello, join, submit, ack, reject,
// resync, ping, ...). Block coordinates and positions use the world frame.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "iglu/voxel.hpp"

namespace iglu::protocol {

enum class PlayerRole { Architect, Builder, System };

std::string_view to_string(PlayerRole r);
std::optional<PlayerRole> role_from_string(std::string_view s);

struct PlayerJoined {
  PlayerRole role = PlayerRole::Architect;
  friend bool operator==(const PlayerJoined&, const PlayerJoined&) = default;
};
struct ChatMessage {
  PlayerRole role = PlayerRole::Architect;
  std::string text;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};
/// Position is in the build frame in memory and the world frame on the wire.
struct PlayerMove {
  PlayerRole role = PlayerRole::Builder;
  Vec3 pos;
  double pitch = 0.0;
  double yaw = 0.0;
  friend bool operator==(const PlayerMove&, const PlayerMove&) = default;
};
struct BlockPlaced {
  Coord at;
  BlockId id = kAir;
  friend bool operator==(const BlockPlaced&, const BlockPlaced&) = default;
};
struct BlockRemoved {
  Coord at;
  friend bool operator==(const BlockRemoved&, const BlockRemoved&) = default;
};
struct TurnEnded {
  PlayerRole role = PlayerRole::Architect;
  friend bool operator==(const TurnEnded&, const TurnEnded&) = default;
};
struct GameEnded {
  bool success = false;
  /// Architect, or System when the server seals an abandoned session.
  PlayerRole reporter = PlayerRole::Architect;
  friend bool operator==(const GameEnded&, const GameEnded&) = default;
};

using EventKind = std::variant<PlayerJoined, ChatMessage, PlayerMove, BlockPlaced, BlockRemoved, TurnEnded, GameEnded>;

std::string_view kind_name(const EventKind& k);

struct GameEvent {
  std::string session_id;
  std::uint64_t seq = 0;
  EventKind kind;
  friend bool operator==(const GameEvent&, const GameEvent&) = default;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// {"kind": "BlockPlaced", "at": [x, y, z], "blockId": 50}, ...
nlohmann::json to_json(const EventKind& k);
/// Throws ProtocolError on unknown kinds or malformed fields.
EventKind event_kind_from_json(const nlohmann::json& j);

/// {"sessionId", "seq", "event"}
nlohmann::json to_json(const GameEvent& e);
GameEvent game_event_from_json(const nlohmann::json& j);

/// {"blocks": [[x,y,z,id]...], "avatar": {"pos": [x,y,z], "pitch", "yaw"}},
/// world frame.
nlohmann::json world_to_json(const WorldState& w);
WorldState world_from_json(const nlohmann::json& j);

/// True for server-to-client event messages (as opposed to control messages).
bool is_event_message(const nlohmann::json& msg);

}  // namespace iglu::protocol
