#include "jms/history/snapshot.hpp"

#include <algorithm>

#include "jms/common/error.hpp"
#include "jms/common/fs.hpp"

namespace jms::history {

namespace stdfs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view kind_name(ManifestEntry::Kind k) {
  switch (k) {
    case ManifestEntry::Kind::kFile: return "file";
    case ManifestEntry::Kind::kDirectory: return "dir";
    case ManifestEntry::Kind::kSymlink: return "symlink";
  }
  return "file";
}

ManifestEntry::Kind kind_from(const std::string& s) {
  if (s == "file") return ManifestEntry::Kind::kFile;
  if (s == "dir") return ManifestEntry::Kind::kDirectory;
  if (s == "symlink") return ManifestEntry::Kind::kSymlink;
  throw Error(ErrorCode::kIoFailure, "unknown manifest entry kind " + s);
}

Error io_failure(const std::string& what, const stdfs::path& p) {
  return Error(ErrorCode::kIoFailure, what + ": " + p.string(), {{"path", p.string()}});
}

// Every existing ancestor of `rel` under `root` must be a real directory,
// so writes cannot be redirected through a symlink planted in the target.
void require_real_parents(const stdfs::path& root, const stdfs::path& rel) {
  stdfs::path cur = root;
  for (auto it = rel.begin(); std::next(it) != rel.end(); ++it) {
    cur /= *it;
    std::error_code ec;
    auto st = stdfs::symlink_status(cur, ec);
    if (ec || st.type() == stdfs::file_type::not_found) return;
    if (st.type() == stdfs::file_type::symlink || st.type() != stdfs::file_type::directory) {
      std::error_code rm;
      stdfs::remove(cur, rm);
      if (rm) throw io_failure("cannot replace non-directory", cur);
      return;
    }
  }
}

void clear_for(const stdfs::path& p, stdfs::file_type wanted) {
  std::error_code ec;
  auto st = stdfs::symlink_status(p, ec);
  if (ec || st.type() == stdfs::file_type::not_found || st.type() == wanted) return;
  stdfs::remove_all(p, ec);
  if (ec) throw io_failure("cannot replace", p);
}

}  // namespace

std::set<std::string> SnapshotManifest::hashes() const {
  std::set<std::string> out;
  for (const auto& e : entries) {
    if (e.kind == ManifestEntry::Kind::kFile) out.insert(e.hash);
  }
  return out;
}

void to_json(json& j, const SnapshotManifest& m) {
  j = json{{"total_bytes", m.total_bytes}, {"entries", json::array()}};
  for (const auto& e : m.entries) {
    json je{{"path", e.path}, {"kind", kind_name(e.kind)}, {"mode", e.mode}};
    if (e.kind == ManifestEntry::Kind::kFile) {
      je["size"] = e.size;
      je["hash"] = e.hash;
    }
    if (e.kind == ManifestEntry::Kind::kSymlink) je["target"] = e.target;
    j["entries"].push_back(std::move(je));
  }
}

void from_json(const json& j, SnapshotManifest& m) {
  m.entries.clear();
  m.total_bytes = j.value("total_bytes", std::int64_t{0});
  for (const auto& je : j.at("entries")) {
    ManifestEntry e;
    e.path = je.at("path").get<std::string>();
    if (!fs::is_confined_relative(e.path)) throw io_failure("manifest path escapes", e.path);
    e.kind = kind_from(je.at("kind").get<std::string>());
    e.mode = je.value("mode", 0644u);
    e.size = je.value("size", std::int64_t{0});
    e.hash = je.value("hash", "");
    e.target = je.value("target", "");
    m.entries.push_back(std::move(e));
  }
}

SnapshotManifest take_snapshot(const stdfs::path& dir, BlobStore& blobs) {
  std::error_code ec;
  if (!stdfs::is_directory(dir, ec)) throw io_failure("not a directory", dir);
  SnapshotManifest m;
  stdfs::recursive_directory_iterator it(dir, stdfs::directory_options::none, ec);
  if (ec) throw io_failure("cannot read", dir);
  for (; it != stdfs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) throw io_failure("cannot read", it->path());
    const stdfs::path& p = it->path();
    ManifestEntry e;
    e.path = p.lexically_relative(dir).generic_string();
    const auto st = stdfs::symlink_status(p, ec);
    if (ec) throw io_failure("cannot stat", p);
    e.mode = static_cast<unsigned>(st.permissions()) & 0777u;
    switch (st.type()) {
      case stdfs::file_type::regular: {
        e.kind = ManifestEntry::Kind::kFile;
        const std::string bytes = fs::read_file(p);
        e.size = static_cast<std::int64_t>(bytes.size());
        e.hash = blobs.put(bytes);
        m.total_bytes += e.size;
        break;
      }
      case stdfs::file_type::directory:
        e.kind = ManifestEntry::Kind::kDirectory;
        break;
      case stdfs::file_type::symlink:
        e.kind = ManifestEntry::Kind::kSymlink;
        e.target = stdfs::read_symlink(p, ec).string();
        if (ec) throw io_failure("cannot read link", p);
        break;
      default:
        throw io_failure("special file cannot be snapshotted", p);
    }
    m.entries.push_back(std::move(e));
  }
  std::sort(m.entries.begin(), m.entries.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return m;
}

void restore_snapshot(const SnapshotManifest& manifest, const stdfs::path& target, const BlobStore& blobs) {
  for (const auto& e : manifest.entries) {
    if (!fs::is_confined_relative(e.path)) throw io_failure("manifest path escapes", e.path);
    if (e.kind == ManifestEntry::Kind::kFile && !blobs.contains(e.hash)) {
      throw Error(ErrorCode::kMissingBlob, "missing blob " + e.hash, {{"hash", e.hash}, {"path", e.path}});
    }
  }
  std::error_code ec;
  stdfs::create_directories(target, ec);
  if (ec) throw io_failure("cannot create", target);
  for (const auto& e : manifest.entries) {
    const stdfs::path rel(e.path);
    const stdfs::path p = target / rel;
    require_real_parents(target, rel);
    switch (e.kind) {
      case ManifestEntry::Kind::kDirectory:
        clear_for(p, stdfs::file_type::directory);
        stdfs::create_directories(p, ec);
        if (ec) throw io_failure("cannot create", p);
        stdfs::permissions(p, static_cast<stdfs::perms>(e.mode | 0700u), ec);
        break;
      case ManifestEntry::Kind::kFile:
        clear_for(p, stdfs::file_type::regular);
        fs::write_file_atomic(p, blobs.get(e.hash));
        stdfs::permissions(p, static_cast<stdfs::perms>(e.mode), ec);
        break;
      case ManifestEntry::Kind::kSymlink:
        stdfs::create_directories(p.parent_path(), ec);
        clear_for(p, stdfs::file_type::none);
        stdfs::remove(p, ec);
        stdfs::create_symlink(e.target, p, ec);
        if (ec) throw io_failure("cannot create link", p);
        break;
    }
  }
}

}  // namespace jms::history
