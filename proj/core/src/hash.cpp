#include "advtex/hash.hpp"

#include <cstdio>
#include <memory>

#include "advtex/errors.hpp"

namespace advtex {

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

uint64_t hash_file(const std::string& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "rb"),
                                                       std::fclose);
    if (!fp) throw IoError("cannot open file for hashing: " + path);
    uint64_t h = 0xcbf29ce484222325ULL;
    unsigned char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), fp.get())) > 0) h = fnv1a64(buf, n, h);
    if (std::ferror(fp.get())) throw IoError("read error while hashing: " + path);
    return h;
}

}  // namespace advtex
