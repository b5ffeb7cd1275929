#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradeforge/util/files.hpp"

namespace gradeforge::classroom {

// Content-addressed storage: blobs/<first two hex>/<sha256 hex>.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path dir);

  // Returns the content address. Idempotent.
  std::string put(std::string_view data);
  // Throws Error(internal) when missing or when the content no longer
  // matches its address.
  std::string get(const std::string& hash) const;
  bool contains(const std::string& hash) const;

  // A snapshot is a manifest blob mapping paths to content blobs.
  std::string put_snapshot(const util::FileMap& files);
  util::FileMap get_snapshot(const std::string& hash) const;

 private:
  std::filesystem::path path_for(const std::string& hash) const;
  std::filesystem::path dir_;
};

// Address a snapshot would get, computed without touching the store.
std::string snapshot_hash(const util::FileMap& files);

// Append-only JSON-lines event log.
class EventLog {
 public:
  struct Loaded {
    std::vector<nlohmann::json> events;
    // Set when a corrupt trailing record was cut off.
    std::optional<std::string> warning;
  };

  // Reads every record. A damaged final record is truncated from the file
  // and reported in `warning`; damage before the last record throws
  // Error(config) because later records may depend on it.
  static Loaded load(const std::filesystem::path& path);

  explicit EventLog(std::filesystem::path path);
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  // Writes one record and flushes it to disk. Returns the record as it will
  // read back on replay (invalid UTF-8 replaced). Not synchronized; callers
  // serialize appends.
  nlohmann::json append(const nlohmann::json& event);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

}  // namespace gradeforge::classroom
