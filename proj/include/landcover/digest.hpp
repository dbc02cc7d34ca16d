#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace landcover {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Lowercase hex SHA-256 of a file's contents; throws LoadError if unreadable.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace landcover
