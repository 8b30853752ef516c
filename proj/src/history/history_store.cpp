#include "jms/history/history_store.hpp"

#include "jms/common/crypto.hpp"
#include "jms/common/error.hpp"
#include "jms/common/fs.hpp"

namespace jms::history {

using nlohmann::json;

HistoryStore::HistoryStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".json") continue;
    auto doc = fs::read_json(entry.path());
    if (!doc || !doc->contains("key")) continue;
    const std::string key = doc->at("key").get<std::string>();
    versions_[key] = doc->value("version", std::uint64_t{0});
    live_[key] = !doc->value("deleted", false);
  }
}

std::filesystem::path HistoryStore::file_of(const std::string& key) const {
  return dir_ / (crypto::sha256_hex(key) + ".json");
}

std::uint64_t HistoryStore::write(const std::string& key, const json& value, bool deleted) {
  std::lock_guard lock(mu_);
  const std::uint64_t v = versions_[key] + 1;
  json doc{{"key", key}, {"version", v}, {"deleted", deleted}, {"value", deleted ? json(nullptr) : value}};
  fs::write_json_atomic(file_of(key), doc);
  versions_[key] = v;
  live_[key] = !deleted;
  return v;
}

std::uint64_t HistoryStore::put(const std::string& key, const json& value) { return write(key, value, false); }

std::uint64_t HistoryStore::erase(const std::string& key) { return write(key, nullptr, true); }

std::optional<Versioned> HistoryStore::get(const std::string& key) const {
  ++reads_;
  std::lock_guard lock(mu_);
  if (!versions_.count(key)) return std::nullopt;
  auto doc = fs::read_json(file_of(key));
  if (!doc) throw Error(ErrorCode::kIoFailure, "history record vanished: " + key);
  return Versioned{doc->at("version").get<std::uint64_t>(), doc->at("value"), doc->value("deleted", false)};
}

std::vector<std::string> HistoryStore::keys(const std::string& prefix) const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (auto it = live_.lower_bound(prefix); it != live_.end() && it->first.compare(0, prefix.size(), prefix) == 0; ++it) {
    if (it->second) out.push_back(it->first);
  }
  return out;
}

void HistoryCache::install(const std::string& key, Versioned v) {
  std::unique_lock lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end() || it->second.version < v.version) entries_[key] = std::move(v);
}

std::optional<Versioned> HistoryCache::get(const std::string& key) {
  {
    std::shared_lock lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      ++hits_;
      if (it->second.deleted) return std::nullopt;
      return it->second;
    }
  }
  ++misses_;
  auto loaded = store_.get(key);
  if (!loaded) return std::nullopt;
  install(key, *loaded);
  std::shared_lock lock(mu_);
  const auto& cur = entries_.at(key);
  if (cur.deleted) return std::nullopt;
  return cur;
}

std::uint64_t HistoryCache::put(const std::string& key, const json& value) {
  std::lock_guard w(write_mu_);
  const auto v = store_.put(key, value);
  install(key, Versioned{v, value, false});
  return v;
}

std::uint64_t HistoryCache::erase(const std::string& key) {
  std::lock_guard w(write_mu_);
  const auto v = store_.erase(key);
  install(key, Versioned{v, nullptr, true});
  return v;
}

std::optional<std::uint64_t> HistoryCache::update(const std::string& key,
                                                  const std::function<std::optional<json>(const json&)>& fn) {
  std::lock_guard w(write_mu_);
  auto cur = get(key);
  auto next = fn(cur ? cur->value : json(nullptr));
  if (!next) return std::nullopt;
  const auto v = store_.put(key, *next);
  install(key, Versioned{v, *next, false});
  return v;
}

}  // namespace jms::history
