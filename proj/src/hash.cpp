#include "cloak/hash.hpp"

#include <cstdio>
#include <fstream>

#include "cloak/errors.hpp"

namespace cloak {

std::string to_hex(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

std::string Fnv1a::hex() const { return to_hex(state_); }

uint64_t hash_bytes(const void* bytes, size_t n) {
    Fnv1a h;
    h.update(bytes, n);
    return h.digest();
}

std::string hash_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open file for hashing: " + path);
    Fnv1a h;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h.update(buf, static_cast<size_t>(in.gcount()));
        if (!in) break;
    }
    return h.hex();
}

}  // namespace cloak
