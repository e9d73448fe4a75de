#pragma once

// Collineation group action on caps: semilinear maps (invertible matrix,
// optionally composed with the Frobenius conjugation), invariant signatures,
// witness search for pairwise equivalence, stabilizers, and classification of
// cap lists into equivalence classes.
//
// The equivalence group is the full semilinear group. Witness search is a
// frame-mapping backtracking: it assigns images of a rank-increasing point
// tuple of `a` inside `b`, pruned by per-point incidence invariants and by
// partial-image consistency, with the Frobenius flag tried both ways. It is
// complete: a witness is found whenever one exists.
//
// For caps that do not span the whole space, stabilizer counts and elements
// refer to the group induced on the span of the cap (each element is returned
// canonically extended to an invertible map of the whole space).

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "qcaps/caps.hpp"

namespace qcaps {

using Mat5 = std::array<std::array<Gf4, 5>, 5>;

struct Collineation {
    int dim = 0;  // r + 1
    Mat5 m{};
    bool frobenius = false;

    Vec apply_vec(const Vec& v) const;
};

// Throws std::invalid_argument if the matrix is singular.
Collineation make_collineation(int dim, const Mat5& m, bool frobenius);

Collineation identity_collineation(int dim);

// (a o b)(x) = a(b(x))
Collineation compose(const Collineation& a, const Collineation& b);
Collineation inverse(const Collineation& s);

PointIndex apply_point(const GeometryTables& g, const Collineation& s, PointIndex p);
Cap apply(const Collineation& s, const Cap& cap);

Collineation random_collineation(const GeometryTables& g, std::mt19937_64& rng);

struct InvariantSignature {
    std::vector<std::uint8_t> hyp_spectrum;     // sorted |cap ^ H| over all H
    std::vector<std::uint16_t> degree_spectrum;  // sorted secant counts at members

    bool operator==(const InvariantSignature&) const = default;
    std::uint64_t hash() const;
};

InvariantSignature signature(const Cap& cap);

std::optional<Collineation> are_equivalent(const Cap& a, const Cap& b);

std::uint64_t stabilizer_order(const Cap& cap);

// All stabilizer elements of the group induced on span(cap).
std::vector<Collineation> stabilizer_elements(const Cap& cap);

struct CapClass {
    Cap representative;  // lexicographically least membership mask in class
    std::uint64_t count = 0;
    std::uint64_t stabilizer_order = 0;
    bool complete = false;
};

// Partition caps (same geometry, same size) into equivalence classes.
// Deterministic: classes sorted by representative mask.
std::vector<CapClass> classify(std::span<const Cap> caps);

}  // namespace qcaps
