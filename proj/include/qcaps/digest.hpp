#pragma once

// 64-bit FNV-1a, used for geometry/config/report digests. Digests exist for
// reproducibility bookkeeping, not security.

#include <cstdint>
#include <string>
#include <string_view>

namespace qcaps {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = kFnvOffset) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t x, std::uint64_t seed = kFnvOffset) {
    std::uint64_t h = seed;
    for (int i = 0; i < 8; ++i) {
        h ^= (x >> (8 * i)) & 0xff;
        h *= kFnvPrime;
    }
    return h;
}

inline std::string digest_hex(std::uint64_t h) {
    static const char* hexc = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = hexc[h & 0xf];
        h >>= 4;
    }
    return s;
}

}  // namespace qcaps
