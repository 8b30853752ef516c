#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>

namespace jms::history {

// Content-addressed store: <root>/<first 2 hex>/<sha256 hex>. Objects are
// immutable once written; concurrent puts of the same content are harmless.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  std::string put(std::string_view bytes);
  std::string put_file(const std::filesystem::path& file);
  // Throws kMissingBlob.
  std::string get(const std::string& hash) const;
  bool contains(const std::string& hash) const;
  std::filesystem::path path_of(const std::string& hash) const;
  void remove(const std::string& hash);

  std::set<std::string> hashes() const;
  std::size_t object_count() const { return hashes().size(); }

 private:
  std::filesystem::path root_;
};

bool is_sha256_hex(std::string_view s);

}  // namespace jms::history
