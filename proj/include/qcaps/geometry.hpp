#pragma once

// Immutable incidence structure for PG(r,4), r in {2,3,4}.
//
// Points are the normalized homogeneous vectors (first nonzero coordinate 1),
// indexed in lexicographic coordinate order under the element order
// 0 < 1 < w < w^2. Hyperplanes use the same enumeration of dual vectors, so
// hyperplane 0 is always the one dual to (0,...,0,1), i.e. x_r = 0 — the
// distinguished hyperplane used for embeddings.
//
// Tables are built once and then only read; concurrent reads are fine.

#include <array>
#include <cstdint>
#include <vector>

#include "qcaps/gf4.hpp"
#include "qcaps/mask.hpp"

namespace qcaps {

using PointIndex = std::uint16_t;

struct GeometryTables {
    int r = 0;
    int num_points = 0;  // (4^(r+1) - 1) / 3, also the hyperplane count
    std::vector<Vec> points;
    std::vector<Vec> hyperplanes;
    std::vector<PointMask> hyp_members;  // per hyperplane: member points
    std::vector<PointMask> point_hyps;   // per point: hyperplanes through it
    // Full square table: for p != q the 3 points of line(p,q) other than p,q,
    // stored in ascending index order.
    std::vector<std::array<PointIndex, 3>> third;
    std::array<PointIndex, 1024> index_by_pack;  // 0xffff = not a point
    PointMask universe;
    std::uint64_t digest = 0;

    static GeometryTables build(int r);

    // Index of a (not necessarily normalized) nonzero vector.
    PointIndex point_index(const Vec& v) const;

    const std::array<PointIndex, 3>& residual_points(PointIndex p, PointIndex q) const;

    bool is_collinear(PointIndex p, PointIndex q, PointIndex s) const;

    // Distinguished hyperplane x_r = 0 (always index 0 in this enumeration).
    PointIndex distinguished_hyperplane() const { return 0; }
    const PointMask& distinguished_members() const { return hyp_members[0]; }
    PointMask off_hyperplane_mask() const { return universe.andnot(hyp_members[0]); }
};

// Embedding PG(r-1,4) -> PG(r,4), (x_0,...,x_{r-1}) -> (x_0,...,x_{r-1},0).
// Image lies in the distinguished hyperplane of `hi`.
PointIndex embed_point(const GeometryTables& lo, const GeometryTables& hi, PointIndex p);

}  // namespace qcaps
