#pragma once

// Caps (point sets with no 3 collinear) and the incremental extension state
// driving the exhaustive search: the secant-exclusion mask plus the candidate
// set of points that keep the cap property.

#include <optional>
#include <span>
#include <vector>

#include "qcaps/geometry.hpp"

namespace qcaps {

struct Cap {
    const GeometryTables* geo = nullptr;
    PointMask members;
    int size = 0;

    static Cap empty(const GeometryTables& g) { return Cap{&g, PointMask{}, 0}; }
    static Cap from_mask(const GeometryTables& g, const PointMask& m) {
        return Cap{&g, m, m.count()};
    }
    static Cap from_points(const GeometryTables& g, std::span<const PointIndex> pts);

    bool contains(PointIndex p) const { return members.test(p); }
    std::vector<PointIndex> point_list() const;

    bool operator==(const Cap& o) const { return members == o.members; }
};

struct CollinearTriple {
    PointIndex a, b, c;
};

// First collinear triple among the given points, in insertion-scan order;
// nullopt means the set is a cap. Duplicates count as degenerate input.
std::optional<CollinearTriple> find_collinear_triple(const GeometryTables& g,
                                                     std::span<const PointIndex> pts);

bool is_cap(const GeometryTables& g, std::span<const PointIndex> pts);
bool is_cap(const Cap& cap);

struct ExtensionState {
    Cap cap;
    PointMask excluded;    // points on some secant of the cap, minus members
    PointMask candidates;  // complement of members and excluded

    static ExtensionState build(const Cap& cap);

    // Incremental update; p must be a candidate. The result equals
    // build(cap + p) exactly (verified in checked mode).
    void add_point(PointIndex p);

    bool matches_rebuild() const;
};

// True iff no point extends the cap (candidate set empty).
bool is_complete(const Cap& cap);

// Embed a cap of PG(r-1,4) into the distinguished hyperplane of PG(r,4).
Cap embed_cap(const GeometryTables& lo, const GeometryTables& hi, const Cap& seed);

}  // namespace qcaps
