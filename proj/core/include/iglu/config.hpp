#pragma once

// Server configuration: JSON file plus IGLU_* environment overrides.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace iglu {

struct ServerConfig {
  std::string wire_host = "127.0.0.1";
  /// 0 picks an ephemeral port.
  std::uint16_t wire_port = 7070;
  std::string admin_host = "127.0.0.1";
  std::uint16_t admin_port = 7071;
  std::size_t step_budget = 250;
  std::chrono::seconds session_cap{20 * 60};
  std::chrono::seconds lease_timeout{30 * 60};
  std::chrono::seconds disconnect_grace{30 * 60};
  std::chrono::seconds join_code_ttl{24 * 60 * 60};
  std::chrono::seconds heartbeat{10};
  /// Empty keeps everything in memory.
  std::string storage_root = "iglu-data";
  std::string palette_file;
  /// Static assets served by the admin port when set.
  std::string web_root;
  /// Task files loaded at startup (an object or an array of tasks each).
  std::vector<std::string> task_files;
  std::uint64_t seed = 0;
  bool collection_mode = false;
};

/// Keys: wireHost, wirePort, adminHost, adminPort, stepBudget,
/// sessionCapSeconds, leaseSeconds, disconnectGraceSeconds,
/// joinCodeTtlSeconds, heartbeatSeconds, storageRoot, paletteFile, webRoot,
/// taskFiles, seed, collectionMode. Unknown keys are rejected.
nlohmann::json to_json(const ServerConfig& c);
ServerConfig server_config_from_json(const nlohmann::json& j);

using EnvLookup = std::function<const char*(const char*)>;

/// Each key K may be overridden by IGLU_<K in upper snake case>, for example
/// IGLU_WIRE_PORT or IGLU_STEP_BUDGET. taskFiles takes a comma-separated list.
ServerConfig apply_env_overrides(const ServerConfig& c, const EnvLookup& lookup);

/// Defaults, then the file (if any), then the process environment. Relative
/// taskFiles, paletteFile and webRoot in the file resolve against its directory.
/// Throws std::runtime_error on unreadable or invalid configuration.
ServerConfig load_server_config(const std::optional<std::filesystem::path>& path);

/// "wirePort" -> "IGLU_WIRE_PORT".
std::string env_name(std::string_view key);

}  // namespace iglu
