#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace jms::crypto {

// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file_hex(const std::filesystem::path& path);

std::string random_hex(std::size_t n_bytes);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

// PBKDF2-HMAC-SHA256, hex output.
std::string pbkdf2_hex(std::string_view password, std::string_view salt_hex, int iterations);

bool constant_time_equal(std::string_view a, std::string_view b);

}  // namespace jms::crypto
