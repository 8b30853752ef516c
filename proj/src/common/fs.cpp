#include "jms/common/fs.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "jms/common/error.hpp"

namespace jms::fs {

std::string read_file(const stdfs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const stdfs::path& path, std::string_view bytes) {
  static std::atomic<unsigned long> counter{0};
  if (path.has_parent_path()) {
    stdfs::create_directories(path.parent_path());
  }
  stdfs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);

  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) {
    throw Error(ErrorCode::kIoFailure, "cannot create " + tmp.string() + ": " + std::strerror(errno));
  }
  const char* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      int err = errno;
      ::close(fd);
      ::unlink(tmp.c_str());
      throw Error(ErrorCode::kIoFailure, "write failed for " + tmp.string() + ": " + std::strerror(err));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    int err = errno;
    ::unlink(tmp.c_str());
    throw Error(ErrorCode::kIoFailure, "rename failed for " + path.string() + ": " + std::strerror(err));
  }
}

std::optional<nlohmann::json> read_json(const stdfs::path& path) {
  std::error_code ec;
  if (!stdfs::exists(path, ec)) return std::nullopt;
  return nlohmann::json::parse(read_file(path));
}

void write_json_atomic(const stdfs::path& path, const nlohmann::json& doc) {
  write_file_atomic(path, doc.dump(2) + "\n");
}

bool is_confined_relative(std::string_view rel) {
  if (rel.empty()) return false;
  stdfs::path p{std::string(rel)};
  if (p.is_absolute() || p.has_root_name() || p.has_root_directory()) return false;
  for (const auto& part : p) {
    if (part == "..") return false;
  }
  return true;
}

stdfs::path confined_join(const stdfs::path& root, std::string_view rel) {
  if (!is_confined_relative(rel)) {
    throw Error(ErrorCode::kPermissionDenied, "path escapes its root: " + std::string(rel));
  }
  return (root / std::string(rel)).lexically_normal();
}

bool is_plain_name(std::string_view name) {
  if (name.empty() || name == "." || name == "..") return false;
  return name.find('/') == std::string_view::npos && name.find('\0') == std::string_view::npos;
}

}  // namespace jms::fs
