#pragma once

// Two-store persistence: an object store for full session logs and world
// states, and append-only tables for the tabular index (games, verdicts,
// collection records). Implementations are thread-safe.

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iglu/protocol.hpp"

namespace iglu {

class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Storage {
 public:
  virtual ~Storage() = default;

  /// Appends a batch atomically: either every event is persisted or none.
  virtual void append_events(const std::string& session_id, std::span<const protocol::GameEvent> events) = 0;
  virtual std::vector<protocol::GameEvent> load_events(const std::string& session_id) const = 0;

  virtual void put_object(const std::string& key, const nlohmann::json& value) = 0;
  virtual std::optional<nlohmann::json> get_object(const std::string& key) const = 0;

  virtual void append_row(const std::string& table, const nlohmann::json& row) = 0;
  virtual std::vector<nlohmann::json> rows(const std::string& table) const = 0;
};

class MemoryStorage final : public Storage {
 public:
  void append_events(const std::string& session_id, std::span<const protocol::GameEvent> events) override;
  std::vector<protocol::GameEvent> load_events(const std::string& session_id) const override;
  void put_object(const std::string& key, const nlohmann::json& value) override;
  std::optional<nlohmann::json> get_object(const std::string& key) const override;
  void append_row(const std::string& table, const nlohmann::json& row) override;
  std::vector<nlohmann::json> rows(const std::string& table) const override;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<protocol::GameEvent>> logs_;
  std::map<std::string, nlohmann::json> objects_;
  std::map<std::string, std::vector<nlohmann::json>> tables_;
};

/// Layout under root:
///   logs/<sessionId>.ndjson    one event message per line
///   objects/<key>.json
///   tables/<table>.ndjson      one row per line
/// A batch is written with a single write call followed by a flush; a torn
/// final line left by a crash is ignored on load.
class FileStorage final : public Storage {
 public:
  explicit FileStorage(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  void append_events(const std::string& session_id, std::span<const protocol::GameEvent> events) override;
  std::vector<protocol::GameEvent> load_events(const std::string& session_id) const override;
  void put_object(const std::string& key, const nlohmann::json& value) override;
  std::optional<nlohmann::json> get_object(const std::string& key) const override;
  void append_row(const std::string& table, const nlohmann::json& row) override;
  std::vector<nlohmann::json> rows(const std::string& table) const override;

 private:
  std::filesystem::path checked(const std::filesystem::path& dir, const std::string& name, const char* ext) const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

}  // namespace iglu
