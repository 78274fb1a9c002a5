#include "iglu/protocol.hpp"

#include "iglu/grid_io.hpp"

namespace iglu::protocol {

namespace {

using nlohmann::json;

PlayerRole required_role(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_string()) throw ProtocolError(std::string("missing role field ") + field);
  auto r = role_from_string(j.at(field).get<std::string>());
  if (!r) throw ProtocolError("unknown role '" + j.at(field).get<std::string>() + "'");
  return *r;
}

Coord world_coord(const json& j) {
  try {
    return to_build(coord_from_json(j.at("at")));
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("bad block coordinate: ") + e.what());
  }
}

}  // namespace

std::string_view to_string(PlayerRole r) {
  switch (r) {
    case PlayerRole::Architect: return "architect";
    case PlayerRole::Builder: return "builder";
    case PlayerRole::System: return "system";
  }
  return "system";
}

std::optional<PlayerRole> role_from_string(std::string_view s) {
  if (s == "architect") return PlayerRole::Architect;
  if (s == "builder") return PlayerRole::Builder;
  if (s == "system") return PlayerRole::System;
  return std::nullopt;
}

std::string_view kind_name(const EventKind& k) {
  static constexpr std::string_view kNames[] = {"PlayerJoined", "ChatMessage", "PlayerMove", "BlockPlaced",
                                                "BlockRemoved", "TurnEnded",   "GameEnded"};
  return kNames[k.index()];
}

json to_json(const EventKind& k) {
  json j{{"kind", std::string(kind_name(k))}};
  std::visit(
      [&j](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, PlayerJoined> || std::is_same_v<T, TurnEnded>) {
          j["role"] = std::string(to_string(e.role));
        } else if constexpr (std::is_same_v<T, ChatMessage>) {
          j["role"] = std::string(to_string(e.role));
          j["text"] = e.text;
        } else if constexpr (std::is_same_v<T, PlayerMove>) {
          j["role"] = std::string(to_string(e.role));
          j["pos"] = {e.pos.x, e.pos.y + kWorldGroundY, e.pos.z};
          j["pitch"] = e.pitch;
          j["yaw"] = e.yaw;
        } else if constexpr (std::is_same_v<T, BlockPlaced>) {
          j["at"] = coord_to_json(to_world(e.at));
          j["blockId"] = e.id;
        } else if constexpr (std::is_same_v<T, BlockRemoved>) {
          j["at"] = coord_to_json(to_world(e.at));
        } else if constexpr (std::is_same_v<T, GameEnded>) {
          j["success"] = e.success;
          j["reporter"] = std::string(to_string(e.reporter));
        }
      },
      k);
  return j;
}

EventKind event_kind_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw ProtocolError("event must be an object with a kind");
  }
  const auto kind = j.at("kind").get<std::string>();
  try {
    if (kind == "PlayerJoined") return PlayerJoined{required_role(j, "role")};
    if (kind == "ChatMessage") {
      if (!j.contains("text") || !j.at("text").is_string()) throw ProtocolError("ChatMessage needs text");
      return ChatMessage{required_role(j, "role"), j.at("text").get<std::string>()};
    }
    if (kind == "PlayerMove") {
      const Vec3 w = vec3_from_json(j.at("pos"));
      return PlayerMove{required_role(j, "role"), {w.x, w.y - kWorldGroundY, w.z}, j.value("pitch", 0.0),
                        j.value("yaw", 0.0)};
    }
    if (kind == "BlockPlaced") {
      const auto id = j.at("blockId").get<long long>();
      if (id <= 0 || id > 0xffff) throw ProtocolError("blockId must be a positive block id");
      return BlockPlaced{world_coord(j), static_cast<BlockId>(id)};
    }
    if (kind == "BlockRemoved") return BlockRemoved{world_coord(j)};
    if (kind == "TurnEnded") return TurnEnded{required_role(j, "role")};
    if (kind == "GameEnded") {
      return GameEnded{j.at("success").get<bool>(),
                       j.contains("reporter") ? required_role(j, "reporter") : PlayerRole::Architect};
    }
  } catch (const ProtocolError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProtocolError("malformed " + kind + ": " + e.what());
  }
  throw ProtocolError("unknown event kind '" + kind + "'");
}

json to_json(const GameEvent& e) { return {{"sessionId", e.session_id}, {"seq", e.seq}, {"event", to_json(e.kind)}}; }

GameEvent game_event_from_json(const json& j) {
  if (!is_event_message(j)) throw ProtocolError("not an event message");
  return {j.at("sessionId").get<std::string>(), j.at("seq").get<std::uint64_t>(), event_kind_from_json(j.at("event"))};
}

json world_to_json(const WorldState& w) {
  const Vec3& p = w.avatar.pos;
  return {{"blocks", grid_to_json(w.grid)},
          {"avatar", {{"pos", {p.x, p.y + kWorldGroundY, p.z}}, {"pitch", w.avatar.pitch}, {"yaw", w.avatar.yaw}}}};
}

WorldState world_from_json(const json& j) {
  try {
    WorldState w;
    w.grid = grid_from_json(j.at("blocks"));
    const auto& a = j.at("avatar");
    const Vec3 p = vec3_from_json(a.at("pos"));
    w.avatar = {{p.x, p.y - kWorldGroundY, p.z}, a.value("pitch", 0.0), a.value("yaw", 0.0)};
    return w;
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("malformed world: ") + e.what());
  }
}

bool is_event_message(const json& msg) {
  return msg.is_object() && msg.contains("sessionId") && msg.contains("seq") && msg.contains("event") &&
         !msg.contains("type");
}

}  // namespace iglu::protocol
