#ifndef HGMD_HASH_HPP
#define HGMD_HASH_HPP

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace hgmd {

/// Git blob hash (SHA-1 over "blob <len>\0" + content), lowercase hex.
std::string git_blob_hash(std::span<const unsigned char> bytes);
std::string git_blob_hash(std::string_view text);
std::string git_blob_hash_file(const std::filesystem::path& path);

}  // namespace hgmd

#endif  // HGMD_HASH_HPP
