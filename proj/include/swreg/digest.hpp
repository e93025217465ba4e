#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace swreg {

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view text);
/// Throws std::runtime_error when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace swreg
