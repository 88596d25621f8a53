#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace cloak {

// FNV-1a, 64-bit. Used for run manifests and detector weight checksums.
class Fnv1a {
public:
    void update(const void* bytes, size_t n) {
        const auto* p = static_cast<const unsigned char*>(bytes);
        for (size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(double v) { update(&v, sizeof(v)); }
    void update(const std::vector<double>& v) {
        if (!v.empty()) update(v.data(), v.size() * sizeof(double));
    }
    void update(const std::string& s) { update(s.data(), s.size()); }

    uint64_t digest() const { return state_; }
    std::string hex() const;

private:
    uint64_t state_ = 0xcbf29ce484222325ULL;
};

uint64_t hash_bytes(const void* bytes, size_t n);
std::string hash_file_hex(const std::string& path);  // throws IoFailure

std::string to_hex(uint64_t v);

}  // namespace cloak
