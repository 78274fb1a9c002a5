#include "iglu/config.hpp"

#include <cctype>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "iglu/grid_io.hpp"

namespace iglu {

namespace {

using nlohmann::json;

template <class T>
T number(const json& j, const char* key, T fallback, long long min, long long max) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw std::runtime_error(std::string("config ") + key + " must be an integer");
  const auto n = v.get<long long>();
  if (n < min || n > max) throw std::runtime_error(std::string("config ") + key + " out of range");
  return static_cast<T>(n);
}

std::string text(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw std::runtime_error(std::string("config ") + key + " must be a string");
  return j.at(key).get<std::string>();
}

std::chrono::seconds seconds(const json& j, const char* key, std::chrono::seconds fallback) {
  return std::chrono::seconds(number<long long>(j, key, fallback.count(), 1, std::numeric_limits<int>::max()));
}

}  // namespace

std::string env_name(std::string_view key) {
  std::string out = "IGLU_";
  for (char c : key) {
    if (std::isupper(static_cast<unsigned char>(c))) out += '_';
    out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

json to_json(const ServerConfig& c) {
  return {{"wireHost", c.wire_host},
          {"wirePort", c.wire_port},
          {"adminHost", c.admin_host},
          {"adminPort", c.admin_port},
          {"stepBudget", c.step_budget},
          {"sessionCapSeconds", c.session_cap.count()},
          {"leaseSeconds", c.lease_timeout.count()},
          {"disconnectGraceSeconds", c.disconnect_grace.count()},
          {"joinCodeTtlSeconds", c.join_code_ttl.count()},
          {"heartbeatSeconds", c.heartbeat.count()},
          {"storageRoot", c.storage_root},
          {"paletteFile", c.palette_file},
          {"webRoot", c.web_root},
          {"taskFiles", c.task_files},
          {"seed", c.seed},
          {"collectionMode", c.collection_mode}};
}

ServerConfig server_config_from_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("config must be a JSON object");
  const json known = to_json(ServerConfig{});
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw std::runtime_error("unknown config key '" + key + "'");
  }
  ServerConfig c;
  c.wire_host = text(j, "wireHost", c.wire_host);
  c.wire_port = number<std::uint16_t>(j, "wirePort", c.wire_port, 0, 65535);
  c.admin_host = text(j, "adminHost", c.admin_host);
  c.admin_port = number<std::uint16_t>(j, "adminPort", c.admin_port, 0, 65535);
  c.step_budget = number<std::size_t>(j, "stepBudget", c.step_budget, 1, 1'000'000);
  c.session_cap = seconds(j, "sessionCapSeconds", c.session_cap);
  c.lease_timeout = seconds(j, "leaseSeconds", c.lease_timeout);
  c.disconnect_grace = seconds(j, "disconnectGraceSeconds", c.disconnect_grace);
  c.join_code_ttl = seconds(j, "joinCodeTtlSeconds", c.join_code_ttl);
  c.heartbeat = seconds(j, "heartbeatSeconds", c.heartbeat);
  c.storage_root = text(j, "storageRoot", c.storage_root);
  c.palette_file = text(j, "paletteFile", c.palette_file);
  c.web_root = text(j, "webRoot", c.web_root);
  if (j.contains("taskFiles")) {
    if (!j.at("taskFiles").is_array()) throw std::runtime_error("config taskFiles must be an array");
    c.task_files.clear();
    for (const auto& f : j.at("taskFiles")) {
      if (!f.is_string()) throw std::runtime_error("config taskFiles entries must be strings");
      c.task_files.push_back(f.get<std::string>());
    }
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) {
      throw std::runtime_error("config seed must be an integer");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("collectionMode")) {
    if (!j.at("collectionMode").is_boolean()) throw std::runtime_error("config collectionMode must be a boolean");
    c.collection_mode = j.at("collectionMode").get<bool>();
  }
  return c;
}

ServerConfig apply_env_overrides(const ServerConfig& c, const EnvLookup& lookup) {
  json j = to_json(c);
  for (auto& [key, value] : j.items()) {
    const char* raw = lookup(env_name(key).c_str());
    if (raw == nullptr) continue;
    const std::string s = raw;
    try {
      if (value.is_string()) {
        value = s;
      } else if (value.is_boolean()) {
        if (s != "true" && s != "false" && s != "1" && s != "0") throw std::invalid_argument("not a boolean");
        value = s == "true" || s == "1";
      } else if (value.is_array()) {
        json list = json::array();
        std::stringstream ss(s);
        for (std::string item; std::getline(ss, item, ',');) {
          if (!item.empty()) list.push_back(item);
        }
        value = list;
      } else {
        std::size_t used = 0;
        const long long n = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        value = n;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("invalid " + env_name(key) + "='" + s + "': " + e.what());
    }
  }
  return server_config_from_json(j);
}

ServerConfig load_server_config(const std::optional<std::filesystem::path>& path) {
  ServerConfig c;
  if (path) {
    json j;
    try {
      j = read_json_file(*path);
    } catch (const std::exception& e) {
      throw std::runtime_error("cannot read config " + path->string() + ": " + e.what());
    }
    c = server_config_from_json(j);
    // Files named in a config file are relative to that file.
    const auto base = path->parent_path();
    auto resolve = [&base](std::string& f) {
      if (!f.empty() && std::filesystem::path(f).is_relative()) f = (base / f).lexically_normal().string();
    };
    for (auto& f : c.task_files) resolve(f);
    resolve(c.palette_file);
    resolve(c.web_root);
  }
  return apply_env_overrides(c, [](const char* name) { return std::getenv(name); });
}

}  // namespace iglu
