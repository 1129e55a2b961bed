#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace advtex {

inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

std::string hex64(uint64_t v);

/// FNV-1a of a whole file's bytes. Throws IoError if unreadable.
uint64_t hash_file(const std::string& path);

}  // namespace advtex
