#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace veristack {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view bytes);

/// 64-bit FNV-1a. Stable across platforms; the stub backend's hashing is defined on it.
constexpr std::uint64_t fnv1a64(std::string_view data) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace veristack
