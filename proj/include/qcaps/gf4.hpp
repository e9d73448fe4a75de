#pragma once

// Arithmetic for GF(4) and short coordinate vectors over it.
//
// Elements are encoded 0,1,2,3 for 0, 1, w, w^2 where w^2 = w + 1. With this
// encoding addition is xor of the 2-bit codes, and the numeric order
// 0 < 1 < w < w^2 is the element order used for every lexicographic
// comparison in the project. Multiplication, inversion and the conjugation
// x -> x^2 are table lookups.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace qcaps {

using Gf4 = std::uint8_t;

inline constexpr Gf4 GF_0 = 0;
inline constexpr Gf4 GF_1 = 1;
inline constexpr Gf4 GF_W = 2;   // w
inline constexpr Gf4 GF_W2 = 3;  // w^2

inline constexpr std::array<std::array<Gf4, 4>, 4> kGf4Mul = {{
    {{0, 0, 0, 0}},
    {{0, 1, 2, 3}},
    {{0, 2, 3, 1}},
    {{0, 3, 1, 2}},
}};

inline constexpr std::array<Gf4, 4> kGf4Inv = {{0, 1, 3, 2}};   // [0] unused
inline constexpr std::array<Gf4, 4> kGf4Conj = {{0, 1, 3, 2}};  // x -> x^2

constexpr Gf4 gf4_add(Gf4 a, Gf4 b) { return static_cast<Gf4>(a ^ b); }

constexpr Gf4 gf4_mul(Gf4 a, Gf4 b) { return kGf4Mul[a][b]; }

inline Gf4 gf4_inv(Gf4 a) {
    if (a == GF_0) throw std::domain_error("gf4_inv: zero is not invertible");
    return kGf4Inv[a];
}

constexpr Gf4 gf4_conj(Gf4 a) { return kGf4Conj[a]; }

// Textual element symbols: 0, 1, w, W (W = w^2).
constexpr char gf4_to_char(Gf4 a) { return "01wW"[a & 3]; }

inline Gf4 gf4_from_char(char c) {
    switch (c) {
        case '0': return GF_0;
        case '1': return GF_1;
        case 'w': return GF_W;
        case 'W': return GF_W2;
        default: throw std::invalid_argument(std::string("gf4_from_char: bad symbol '") + c + "'");
    }
}

// Homogeneous coordinate vector of length r+1, r <= 4.
struct Vec {
    std::array<Gf4, 5> c{};  // c[0] first; unused tail stays zero
    std::uint8_t n = 0;

    bool operator==(const Vec&) const = default;
};

inline Vec make_vec(std::initializer_list<int> coords) {
    Vec v;
    v.n = static_cast<std::uint8_t>(coords.size());
    std::size_t i = 0;
    for (int x : coords) v.c[i++] = static_cast<Gf4>(x);
    return v;
}

inline bool vec_is_zero(const Vec& v) {
    for (std::uint8_t i = 0; i < v.n; ++i)
        if (v.c[i] != GF_0) return false;
    return true;
}

inline Vec vec_add(const Vec& a, const Vec& b) {
    if (a.n != b.n) throw std::invalid_argument("vec_add: length mismatch");
    Vec r = a;
    for (std::uint8_t i = 0; i < a.n; ++i) r.c[i] = gf4_add(a.c[i], b.c[i]);
    return r;
}

inline Vec vec_scale(const Vec& v, Gf4 s) {
    Vec r = v;
    for (std::uint8_t i = 0; i < v.n; ++i) r.c[i] = gf4_mul(v.c[i], s);
    return r;
}

inline Vec vec_conj(const Vec& v) {
    Vec r = v;
    for (std::uint8_t i = 0; i < v.n; ++i) r.c[i] = gf4_conj(v.c[i]);
    return r;
}

// Standard bilinear dot product.
inline Gf4 vec_dot(const Vec& a, const Vec& b) {
    if (a.n != b.n) throw std::invalid_argument("vec_dot: length mismatch");
    Gf4 s = GF_0;
    for (std::uint8_t i = 0; i < a.n; ++i) s = gf4_add(s, gf4_mul(a.c[i], b.c[i]));
    return s;
}

// Hermitian inner product  sum_i u_i * conj(v_i).
inline Gf4 hermitian_dot(const Vec& u, const Vec& v) {
    if (u.n != v.n) throw std::invalid_argument("hermitian_dot: length mismatch");
    Gf4 s = GF_0;
    for (std::uint8_t i = 0; i < u.n; ++i) s = gf4_add(s, gf4_mul(u.c[i], gf4_conj(v.c[i])));
    return s;
}

// Unique scalar multiple whose first nonzero coordinate is 1.
inline Vec normalize_vec(const Vec& v) {
    for (std::uint8_t i = 0; i < v.n; ++i) {
        if (v.c[i] != GF_0) return v.c[i] == GF_1 ? v : vec_scale(v, kGf4Inv[v.c[i]]);
    }
    throw std::domain_error("normalize_vec: zero vector");
}

// 2-bit packing, c[0] in the most significant position, so that numeric order
// of packs equals lexicographic order of coordinate tuples.
inline std::uint16_t vec_pack(const Vec& v) {
    std::uint16_t p = 0;
    for (std::uint8_t i = 0; i < v.n; ++i) p = static_cast<std::uint16_t>((p << 2) | v.c[i]);
    return p;
}

inline Vec vec_unpack(std::uint16_t pack, std::uint8_t n) {
    Vec v;
    v.n = n;
    for (std::uint8_t i = 0; i < n; ++i) v.c[n - 1 - i] = static_cast<Gf4>((pack >> (2 * i)) & 3);
    return v;
}

inline std::string vec_to_string(const Vec& v) {
    std::string s;
    s.reserve(v.n);
    for (std::uint8_t i = 0; i < v.n; ++i) s.push_back(gf4_to_char(v.c[i]));
    return s;
}

inline Vec vec_from_string(const std::string& s) {
    if (s.size() < 3 || s.size() > 5)
        throw std::invalid_argument("vec_from_string: expected 3..5 symbols, got \"" + s + "\"");
    Vec v;
    v.n = static_cast<std::uint8_t>(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v.c[i] = gf4_from_char(s[i]);
    return v;
}

// Rank of a list of vectors, by Gaussian elimination.
template <typename It>
int gf4_rank(It first, It last) {
    std::array<Vec, 8> rows{};
    int nrows = 0;
    for (It it = first; it != last; ++it) {
        Vec v = *it;
        for (int i = 0; i < nrows; ++i) {
            // eliminate against pivot of rows[i]
            std::uint8_t piv = 0;
            while (piv < rows[i].n && rows[i].c[piv] == GF_0) ++piv;
            if (piv < rows[i].n && v.c[piv] != GF_0)
                v = vec_add(v, vec_scale(rows[i], gf4_mul(v.c[piv], kGf4Inv[rows[i].c[piv]])));
        }
        if (!vec_is_zero(v)) {
            if (nrows == 8) return nrows;  // capacity; never hit with n <= 5
            rows[nrows++] = v;
        }
    }
    return nrows;
}

}  // namespace qcaps
