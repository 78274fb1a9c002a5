#include "iglu/storage.hpp"

#include <fstream>
#include <sstream>

namespace iglu {

namespace {

using nlohmann::json;

std::vector<json> read_ndjson(const std::filesystem::path& path) {
  std::vector<json> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto value = json::parse(line, nullptr, false);
    if (value.is_discarded()) {
      if (in.peek() == std::char_traits<char>::eof()) break;  // torn tail
      throw StorageError("corrupt record in " + path.string());
    }
    out.push_back(std::move(value));
  }
  return out;
}

void append_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw StorageError("cannot open " + path.string() + " for append");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw StorageError("write failed for " + path.string());
}

}  // namespace

void MemoryStorage::append_events(const std::string& session_id, std::span<const protocol::GameEvent> events) {
  std::lock_guard lock(mutex_);
  auto& log = logs_[session_id];
  log.insert(log.end(), events.begin(), events.end());
}

std::vector<protocol::GameEvent> MemoryStorage::load_events(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  auto it = logs_.find(session_id);
  return it == logs_.end() ? std::vector<protocol::GameEvent>{} : it->second;
}

void MemoryStorage::put_object(const std::string& key, const json& value) {
  std::lock_guard lock(mutex_);
  objects_[key] = value;
}

std::optional<json> MemoryStorage::get_object(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = objects_.find(key);
  if (it == objects_.end()) return std::nullopt;
  return std::optional<json>(std::in_place, it->second);
}

void MemoryStorage::append_row(const std::string& table, const json& row) {
  std::lock_guard lock(mutex_);
  tables_[table].push_back(row);
}

std::vector<json> MemoryStorage::rows(const std::string& table) const {
  std::lock_guard lock(mutex_);
  auto it = tables_.find(table);
  return it == tables_.end() ? std::vector<json>{} : it->second;
}

FileStorage::FileStorage(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  for (const char* dir : {"logs", "objects", "tables"}) {
    std::filesystem::create_directories(root_ / dir, ec);
    if (ec) throw StorageError("cannot create " + (root_ / dir).string() + ": " + ec.message());
  }
}

std::filesystem::path FileStorage::checked(const std::filesystem::path& dir, const std::string& name,
                                           const char* ext) const {
  if (name.empty() || name.find_first_of("/\\") != std::string::npos || name.find("..") != std::string::npos) {
    throw StorageError("invalid storage key '" + name + "'");
  }
  return root_ / dir / (name + ext);
}

void FileStorage::append_events(const std::string& session_id, std::span<const protocol::GameEvent> events) {
  std::string batch;
  for (const auto& e : events) batch += protocol::to_json(e).dump() + "\n";
  const auto path = checked("logs", session_id, ".ndjson");
  std::lock_guard lock(mutex_);
  append_text(path, batch);
}

std::vector<protocol::GameEvent> FileStorage::load_events(const std::string& session_id) const {
  const auto path = checked("logs", session_id, ".ndjson");
  std::lock_guard lock(mutex_);
  std::vector<protocol::GameEvent> out;
  for (const auto& j : read_ndjson(path)) out.push_back(protocol::game_event_from_json(j));
  return out;
}

void FileStorage::put_object(const std::string& key, const json& value) {
  const auto path = checked("objects", key, ".json");
  const auto tmp = path.string() + ".tmp";
  std::lock_guard lock(mutex_);
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    out << value.dump(2) << '\n';
    if (!out) throw StorageError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw StorageError("cannot commit " + path.string() + ": " + ec.message());
}

std::optional<json> FileStorage::get_object(const std::string& key) const {
  const auto path = checked("objects", key, ".json");
  std::lock_guard lock(mutex_);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  auto value = json::parse(ss.str(), nullptr, false);
  if (value.is_discarded()) throw StorageError("corrupt object " + path.string());
  return std::optional<json>(std::in_place, std::move(value));
}

void FileStorage::append_row(const std::string& table, const json& row) {
  const auto path = checked("tables", table, ".ndjson");
  std::lock_guard lock(mutex_);
  append_text(path, row.dump() + "\n");
}

std::vector<json> FileStorage::rows(const std::string& table) const {
  const auto path = checked("tables", table, ".ndjson");
  std::lock_guard lock(mutex_);
  return read_ndjson(path);
}

}  // namespace iglu
