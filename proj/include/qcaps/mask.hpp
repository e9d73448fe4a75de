#pragma once

// Fixed-width bit mask over point indices, wide enough for PG(4,4).

#include <array>
#include <bit>
#include <cstdint>

namespace qcaps {

struct PointMask {
    static constexpr int kWords = 6;  // 384 bits >= 341
    std::array<std::uint64_t, kWords> w{};

    bool operator==(const PointMask&) const = default;

    void set(int i) { w[i >> 6] |= std::uint64_t{1} << (i & 63); }
    void clear(int i) { w[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
    bool test(int i) const { return (w[i >> 6] >> (i & 63)) & 1; }

    int count() const {
        int c = 0;
        for (auto x : w) c += std::popcount(x);
        return c;
    }

    bool empty() const {
        for (auto x : w)
            if (x) return false;
        return true;
    }

    PointMask operator&(const PointMask& o) const {
        PointMask r;
        for (int i = 0; i < kWords; ++i) r.w[i] = w[i] & o.w[i];
        return r;
    }
    PointMask operator|(const PointMask& o) const {
        PointMask r;
        for (int i = 0; i < kWords; ++i) r.w[i] = w[i] | o.w[i];
        return r;
    }
    PointMask operator^(const PointMask& o) const {
        PointMask r;
        for (int i = 0; i < kWords; ++i) r.w[i] = w[i] ^ o.w[i];
        return r;
    }
    // this & ~o
    PointMask andnot(const PointMask& o) const {
        PointMask r;
        for (int i = 0; i < kWords; ++i) r.w[i] = w[i] & ~o.w[i];
        return r;
    }
    PointMask& operator&=(const PointMask& o) {
        for (int i = 0; i < kWords; ++i) w[i] &= o.w[i];
        return *this;
    }
    PointMask& operator|=(const PointMask& o) {
        for (int i = 0; i < kWords; ++i) w[i] |= o.w[i];
        return *this;
    }
    PointMask& operator^=(const PointMask& o) {
        for (int i = 0; i < kWords; ++i) w[i] ^= o.w[i];
        return *this;
    }

    bool intersects(const PointMask& o) const {
        for (int i = 0; i < kWords; ++i)
            if (w[i] & o.w[i]) return true;
        return false;
    }

    bool is_subset_of(const PointMask& o) const {
        for (int i = 0; i < kWords; ++i)
            if (w[i] & ~o.w[i]) return false;
        return true;
    }

    int intersection_count(const PointMask& o) const {
        int c = 0;
        for (int i = 0; i < kWords; ++i) c += std::popcount(w[i] & o.w[i]);
        return c;
    }

    // First set index >= from, or -1.
    int find_next(int from) const {
        if (from >= 64 * kWords) return -1;
        int wi = from >> 6;
        std::uint64_t cur = w[wi] & (~std::uint64_t{0} << (from & 63));
        while (true) {
            if (cur) return wi * 64 + std::countr_zero(cur);
            if (++wi == kWords) return -1;
            cur = w[wi];
        }
    }
    int find_first() const { return find_next(0); }

    template <typename F>
    void for_each(F&& f) const {
        for (int wi = 0; wi < kWords; ++wi) {
            std::uint64_t cur = w[wi];
            while (cur) {
                f(wi * 64 + std::countr_zero(cur));
                cur &= cur - 1;
            }
        }
    }

    static PointMask first_n(int n) {
        PointMask m;
        for (int wi = 0; wi < kWords && n > 0; ++wi, n -= 64)
            m.w[wi] = n >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
        return m;
    }

    // Mask of indices > i.
    static PointMask above(int i) {
        PointMask m;
        int wi = (i + 1) >> 6;
        if (i + 1 >= 64 * kWords) return m;
        m.w[wi] = ~std::uint64_t{0} << ((i + 1) & 63);
        for (int j = wi + 1; j < kWords; ++j) m.w[j] = ~std::uint64_t{0};
        return m;
    }
};

// Order on membership masks matching lexicographic order of the sorted index
// lists: at the lowest index where the masks differ, the mask containing that
// index is the smaller one.
inline bool mask_lex_less(const PointMask& a, const PointMask& b) {
    for (int i = 0; i < PointMask::kWords; ++i) {
        std::uint64_t d = a.w[i] ^ b.w[i];
        if (d) {
            std::uint64_t low = d & (~d + 1);
            return (a.w[i] & low) != 0;
        }
    }
    return false;
}

}  // namespace qcaps
