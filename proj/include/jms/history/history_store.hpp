#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace jms::history {

struct Versioned {
  std::uint64_t version = 0;
  nlohmann::json value;
  bool deleted = false;
};

// Durable versioned key/value store, one JSON file per key. Versions per
// key start at 1 and grow by one per write or delete.
class HistoryStore {
 public:
  explicit HistoryStore(std::filesystem::path dir);

  std::uint64_t put(const std::string& key, const nlohmann::json& value);
  std::uint64_t erase(const std::string& key);
  std::optional<Versioned> get(const std::string& key) const;
  std::vector<std::string> keys(const std::string& prefix = "") const;
  std::uint64_t read_count() const { return reads_.load(); }

 private:
  std::filesystem::path file_of(const std::string& key) const;
  std::uint64_t write(const std::string& key, const nlohmann::json& value, bool deleted);

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::uint64_t> versions_;  // includes tombstoned keys
  std::map<std::string, bool> live_;
  mutable std::atomic<std::uint64_t> reads_{0};
};

// Read-through cache in front of a HistoryStore. Writers are serialized;
// a loaded value is only installed when it is newer than what is cached,
// so a slow reader can never roll a key back.
class HistoryCache {
 public:
  explicit HistoryCache(HistoryStore& store) : store_(store) {}

  // nullopt for absent or deleted keys.
  std::optional<Versioned> get(const std::string& key);
  std::uint64_t put(const std::string& key, const nlohmann::json& value);
  std::uint64_t erase(const std::string& key);
  // Read-modify-write under the writer lock; `fn` may return nullopt to skip.
  std::optional<std::uint64_t> update(const std::string& key,
                                      const std::function<std::optional<nlohmann::json>(const nlohmann::json&)>& fn);

  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }
  HistoryStore& store() { return store_; }

 private:
  void install(const std::string& key, Versioned v);

  HistoryStore& store_;
  std::mutex write_mu_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Versioned> entries_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

}  // namespace jms::history
