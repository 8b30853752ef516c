#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace jms::fs {

namespace stdfs = std::filesystem;

std::string read_file(const stdfs::path& path);

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const stdfs::path& path, std::string_view bytes);

std::optional<nlohmann::json> read_json(const stdfs::path& path);
void write_json_atomic(const stdfs::path& path, const nlohmann::json& doc);

// True when `rel` is a relative path with no `..` component and no root.
bool is_confined_relative(std::string_view rel);

// Resolves `rel` beneath `root`, throwing kPermissionDenied when it would
// escape. Symlinks inside root are not followed.
stdfs::path confined_join(const stdfs::path& root, std::string_view rel);

// Plain file name: nonempty, no separators, not "." or "..".
bool is_plain_name(std::string_view name);

}  // namespace jms::fs
