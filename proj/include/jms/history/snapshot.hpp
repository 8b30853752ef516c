#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jms/history/blob_store.hpp"

namespace jms::history {

struct ManifestEntry {
  enum class Kind { kFile, kDirectory, kSymlink };

  std::string path;  // relative, '/'-separated
  Kind kind = Kind::kFile;
  std::int64_t size = 0;
  std::string hash;    // files only
  std::string target;  // symlinks only
  unsigned mode = 0644;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

// Entries sorted by path; total_bytes sums file sizes.
struct SnapshotManifest {
  std::vector<ManifestEntry> entries;
  std::int64_t total_bytes = 0;

  std::set<std::string> hashes() const;
  friend bool operator==(const SnapshotManifest&, const SnapshotManifest&) = default;
};

void to_json(nlohmann::json& j, const SnapshotManifest& m);
void from_json(const nlohmann::json& j, SnapshotManifest& m);

// Throws kIoFailure on special files or unreadable entries.
SnapshotManifest take_snapshot(const std::filesystem::path& dir, BlobStore& blobs);

// Verifies every blob first (kMissingBlob), then writes manifested paths
// only; anything else already in `target` is left alone.
void restore_snapshot(const SnapshotManifest& manifest, const std::filesystem::path& target, const BlobStore& blobs);

}  // namespace jms::history
