#include "jms/history/blob_store.hpp"

#include "jms/common/crypto.hpp"
#include "jms/common/error.hpp"
#include "jms/common/fs.hpp"

namespace jms::history {

bool is_sha256_hex(std::string_view s) {
  return s.size() == 64 && s.find_first_not_of("0123456789abcdef") == std::string_view::npos;
}

BlobStore::BlobStore(std::filesystem::path root) : root_(std::move(root)) { std::filesystem::create_directories(root_); }

std::filesystem::path BlobStore::path_of(const std::string& hash) const { return root_ / hash.substr(0, 2) / hash; }

std::string BlobStore::put(std::string_view bytes) {
  const std::string hash = crypto::sha256_hex(bytes);
  if (!contains(hash)) fs::write_file_atomic(path_of(hash), bytes);
  return hash;
}

std::string BlobStore::put_file(const std::filesystem::path& file) { return put(fs::read_file(file)); }

std::string BlobStore::get(const std::string& hash) const {
  if (!is_sha256_hex(hash) || !contains(hash)) {
    throw Error(ErrorCode::kMissingBlob, "missing blob " + hash, {{"hash", hash}});
  }
  return fs::read_file(path_of(hash));
}

bool BlobStore::contains(const std::string& hash) const {
  std::error_code ec;
  return is_sha256_hex(hash) && std::filesystem::is_regular_file(path_of(hash), ec);
}

void BlobStore::remove(const std::string& hash) {
  if (!is_sha256_hex(hash)) return;
  std::error_code ec;
  std::filesystem::remove(path_of(hash), ec);
}

std::set<std::string> BlobStore::hashes() const {
  std::set<std::string> out;
  std::error_code ec;
  for (const auto& bucket : std::filesystem::directory_iterator(root_, ec)) {
    if (!bucket.is_directory()) continue;
    for (const auto& obj : std::filesystem::directory_iterator(bucket.path(), ec)) {
      const std::string name = obj.path().filename().string();
      if (is_sha256_hex(name)) out.insert(name);
    }
  }
  return out;
}

}  // namespace jms::history
