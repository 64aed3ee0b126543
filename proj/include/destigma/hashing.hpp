#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace destigma {

std::string sha256_hex(std::string_view bytes);

// Digest of a whole file's bytes. Throws Error(Io) if unreadable.
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace destigma
