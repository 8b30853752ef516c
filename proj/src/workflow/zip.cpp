#include <zlib.h>

#include <cstdint>
#include <cstring>

#include "jms/common/error.hpp"
#include "jms/workflow/archive.hpp"

namespace jms::workflow {
namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;  // 1980-01-01

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

[[noreturn]] void corrupt(const std::string& why) { throw Error(ErrorCode::kCorruptArchive, "corrupt archive: " + why); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint16_t u16(std::size_t at) const {
    need(at, 2);
    return static_cast<std::uint16_t>(byte(at) | (byte(at + 1) << 8));
  }
  std::uint32_t u32(std::size_t at) const {
    need(at, 4);
    return static_cast<std::uint32_t>(byte(at)) | (static_cast<std::uint32_t>(byte(at + 1)) << 8) |
           (static_cast<std::uint32_t>(byte(at + 2)) << 16) | (static_cast<std::uint32_t>(byte(at + 3)) << 24);
  }
  std::string_view slice(std::size_t at, std::size_t n) const {
    need(at, n);
    return bytes_.substr(at, n);
  }
  std::size_t size() const { return bytes_.size(); }

 private:
  void need(std::size_t at, std::size_t n) const {
    if (at > bytes_.size() || n > bytes_.size() - at) corrupt("truncated");
  }
  unsigned byte(std::size_t at) const { return static_cast<unsigned char>(bytes_[at]); }

  std::string_view bytes_;
};

std::string deflate_raw(std::string_view data) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorCode::kInternal, "deflateInit2 failed");
  }
  std::string out(deflateBound(&zs, static_cast<uLong>(data.size())), '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::kInternal, "deflate failed");
  out.resize(zs.total_out);
  return out;
}

std::string inflate_raw(std::string_view data, std::size_t expected_size) {
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) throw Error(ErrorCode::kInternal, "inflateInit2 failed");
  // One spare byte lets inflate reach Z_STREAM_END for empty payloads and
  // exposes streams longer than advertised.
  std::string out(expected_size + 1, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  std::size_t produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected_size) corrupt("bad deflate stream");
  out.resize(expected_size);
  return out;
}

std::uint32_t crc_of(std::string_view data) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

}  // namespace

std::string zip_write(const std::vector<ZipEntry>& entries) {
  std::string out;
  std::string central;
  for (const auto& e : entries) {
    const std::uint32_t crc = crc_of(e.data);
    const std::string packed = deflate_raw(e.data);
    const auto offset = static_cast<std::uint32_t>(out.size());

    put32(out, kLocalSig);
    put16(out, 20);
    put16(out, 0x0800);  // UTF-8 names
    put16(out, 8);
    put16(out, 0);
    put16(out, kDosDate);
    put32(out, crc);
    put32(out, static_cast<std::uint32_t>(packed.size()));
    put32(out, static_cast<std::uint32_t>(e.data.size()));
    put16(out, static_cast<std::uint16_t>(e.name.size()));
    put16(out, 0);
    out += e.name;
    out += packed;

    put32(central, kCentralSig);
    put16(central, 20);
    put16(central, 20);
    put16(central, 0x0800);
    put16(central, 8);
    put16(central, 0);
    put16(central, kDosDate);
    put32(central, crc);
    put32(central, static_cast<std::uint32_t>(packed.size()));
    put32(central, static_cast<std::uint32_t>(e.data.size()));
    put16(central, static_cast<std::uint16_t>(e.name.size()));
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put32(central, 0);
    put32(central, offset);
    central += e.name;
  }
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  put32(out, kEndSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, cd_offset);
  put16(out, 0);
  return out;
}

std::vector<ZipEntry> zip_read(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < 22) corrupt("too short");

  // The end record sits within the last 22 + 65535 bytes.
  std::size_t eocd = std::string_view::npos;
  const std::size_t lowest = bytes.size() > 22 + 0xffff ? bytes.size() - 22 - 0xffff : 0;
  for (std::size_t pos = bytes.size() - 22 + 1; pos-- > lowest;) {
    if (r.u32(pos) == kEndSig) {
      eocd = pos;
      break;
    }
  }
  if (eocd == std::string_view::npos) corrupt("no end of central directory");

  const std::uint16_t count = r.u16(eocd + 10);
  const std::uint32_t cd_size = r.u32(eocd + 12);
  const std::uint32_t cd_offset = r.u32(eocd + 16);
  if (static_cast<std::uint64_t>(cd_offset) + cd_size > eocd) corrupt("central directory out of range");

  std::vector<ZipEntry> entries;
  std::size_t pos = cd_offset;
  for (std::uint16_t i = 0; i < count; ++i) {
    if (r.u32(pos) != kCentralSig) corrupt("bad central header");
    const std::uint16_t method = r.u16(pos + 10);
    const std::uint32_t crc = r.u32(pos + 16);
    const std::uint32_t csize = r.u32(pos + 20);
    const std::uint32_t usize = r.u32(pos + 24);
    const std::uint16_t name_len = r.u16(pos + 28);
    const std::uint16_t extra_len = r.u16(pos + 30);
    const std::uint16_t comment_len = r.u16(pos + 32);
    const std::uint32_t local = r.u32(pos + 42);
    std::string name(r.slice(pos + 46, name_len));
    pos += 46u + name_len + extra_len + comment_len;

    if (r.u32(local) != kLocalSig) corrupt("bad local header for " + name);
    const std::uint16_t lname = r.u16(local + 26);
    const std::uint16_t lextra = r.u16(local + 28);
    std::string_view packed = r.slice(local + 30u + lname + lextra, csize);

    if (usize > (1u << 28)) corrupt("entry too large: " + name);
    std::string data;
    if (method == 0) {
      if (csize != usize) corrupt("stored size mismatch for " + name);
      data = std::string(packed);
    } else if (method == 8) {
      data = inflate_raw(packed, usize);
    } else {
      corrupt("unsupported compression method for " + name);
    }
    if (crc_of(data) != crc) corrupt("crc mismatch for " + name);
    entries.push_back(ZipEntry{std::move(name), std::move(data)});
  }
  return entries;
}

}  // namespace jms::workflow
