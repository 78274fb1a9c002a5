#pragma once

// JSON encodings shared by records, task files and the wire protocol. Grids
// travel as arrays of [x, y, z, blockId] quadruples in the world frame.

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "iglu/voxel.hpp"

namespace iglu {

/// Block color names and their ids.
class Palette {
 public:
  /// blue, green, red, orange, purple, yellow.
  static Palette defaults();
  /// JSON object {"color": id, ...}. Throws std::runtime_error on bad input.
  static Palette load(const std::filesystem::path& path);
  static Palette from_json(const nlohmann::json& j);

  std::optional<BlockId> id_of(std::string_view color) const;
  std::optional<std::string> name_of(BlockId id) const;
  bool contains(BlockId id) const { return name_of(id).has_value(); }
  const std::map<std::string, BlockId>& colors() const noexcept { return by_name_; }

  nlohmann::json to_json() const;

 private:
  std::map<std::string, BlockId> by_name_;
};

nlohmann::json coord_to_json(const Coord& c);
Coord coord_from_json(const nlohmann::json& j);

/// World-frame quadruples, sorted by coordinate.
nlohmann::json grid_to_json(const BlockGrid& g);

/// Accepts a quadruple array or an object with a "blocks" array (the
/// worldEndingState shape). Throws std::runtime_error or VoxelError.
BlockGrid grid_from_json(const nlohmann::json& j);

nlohmann::json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);

/// Reads a JSON file, tolerating trailing commas before ']' or '}'.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Removes commas that directly precede a closing bracket, outside strings.
std::string strip_trailing_commas(std::string_view text);

}  // namespace iglu
