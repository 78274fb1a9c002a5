#include "iglu/grid_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace iglu {

Palette Palette::defaults() {
  Palette p;
  p.by_name_ = {{"blue", 57}, {"yellow", 50}, {"green", 59}, {"orange", 47}, {"purple", 56}, {"red", 60}};
  return p;
}

Palette Palette::from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.empty()) {
    throw std::runtime_error("palette must be a non-empty object of color -> id");
  }
  Palette p;
  for (const auto& [name, id] : j.items()) {
    if (!id.is_number_integer() || id.get<long long>() <= 0 || id.get<long long>() > 0xffff) {
      throw std::runtime_error("palette id for '" + name + "' must be a positive integer");
    }
    p.by_name_[name] = id.get<BlockId>();
  }
  return p;
}

Palette Palette::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

std::optional<BlockId> Palette::id_of(std::string_view color) const {
  auto it = by_name_.find(std::string(color));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> Palette::name_of(BlockId id) const {
  for (const auto& [name, value] : by_name_) {
    if (value == id) return name;
  }
  return std::nullopt;
}

nlohmann::json Palette::to_json() const { return nlohmann::json(by_name_); }

nlohmann::json coord_to_json(const Coord& c) { return nlohmann::json::array({c.x, c.y, c.z}); }

Coord coord_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error("coordinate must be [x, y, z]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

nlohmann::json grid_to_json(const BlockGrid& g) {
  auto out = nlohmann::json::array();
  for (const auto& [c, id] : g) {
    const Coord w = to_world(c);
    out.push_back({w.x, w.y, w.z, id});
  }
  return out;
}

BlockGrid grid_from_json(const nlohmann::json& j) {
  const nlohmann::json& blocks = j.is_object() ? j.at("blocks") : j;
  if (!blocks.is_array()) throw std::runtime_error("blocks must be an array");
  BlockGrid g;
  for (const auto& b : blocks) {
    if (!b.is_array() || b.size() != 4) {
      throw std::runtime_error("block entry must be [x, y, z, blockId]");
    }
    for (const auto& v : b) {
      if (!v.is_number_integer()) throw std::runtime_error("block entry fields must be integers");
    }
    const Coord c = to_build({b[0].get<int>(), b[1].get<int>(), b[2].get<int>()});
    const auto id = b[3].get<long long>();
    if (id <= 0 || id > 0xffff) throw VoxelError(VoxelErrc::InvalidBlock, "block id " + std::to_string(id));
    if (g.contains(c)) throw std::runtime_error("duplicate block at " + to_string(to_world(c)));
    g.set(c, static_cast<BlockId>(id));
  }
  return g;
}

nlohmann::json vec3_to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error("position must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string strip_trailing_commas(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  bool escaped = false;
  std::size_t pending_comma = std::string::npos;
  for (char ch : text) {
    if (in_string) {
      out.push_back(ch);
      if (escaped) {
        escaped = false;
      } else if (ch == '\\') {
        escaped = true;
      } else if (ch == '"') {
        in_string = false;
      }
      continue;
    }
    if (ch == ']' || ch == '}') {
      if (pending_comma != std::string::npos) out.erase(pending_comma, 1);
      pending_comma = std::string::npos;
    } else if (ch == ',') {
      pending_comma = out.size();
    } else if (ch != ' ' && ch != '\t' && ch != '\n' && ch != '\r') {
      pending_comma = std::string::npos;
    }
    if (ch == '"') in_string = true;
    out.push_back(ch);
  }
  return out;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return nlohmann::json::parse(strip_trailing_commas(buffer.str()));
}

}  // namespace iglu
