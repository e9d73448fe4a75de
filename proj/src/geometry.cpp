#include "qcaps/geometry.hpp"

#include <algorithm>
#include <stdexcept>

#include "qcaps/digest.hpp"

namespace qcaps {

GeometryTables GeometryTables::build(int r) {
    if (r < 2 || r > 4) throw std::invalid_argument("GeometryTables::build: r must be 2, 3 or 4");

    GeometryTables g;
    g.r = r;
    const int n = r + 1;
    const int npacks = 1 << (2 * n);

    g.index_by_pack.fill(0xffff);
    // Ascending pack order is lexicographic coordinate order; keeping exactly
    // the vectors whose first nonzero coordinate is 1 enumerates every
    // projective point once, already sorted.
    for (int pack = 1; pack < npacks; ++pack) {
        Vec v = vec_unpack(static_cast<std::uint16_t>(pack), static_cast<std::uint8_t>(n));
        std::uint8_t lead = 0;
        while (lead < v.n && v.c[lead] == GF_0) ++lead;
        if (lead == v.n || v.c[lead] != GF_1) continue;
        g.index_by_pack[pack] = static_cast<PointIndex>(g.points.size());
        g.points.push_back(v);
    }
    g.num_points = static_cast<int>(g.points.size());
    g.universe = PointMask::first_n(g.num_points);

    // Non-normalized packs resolve through their normalized representative.
    for (int pack = 1; pack < npacks; ++pack) {
        if (g.index_by_pack[pack] != 0xffff) continue;
        Vec v = vec_unpack(static_cast<std::uint16_t>(pack), static_cast<std::uint8_t>(n));
        if (vec_is_zero(v)) continue;
        g.index_by_pack[pack] = g.index_by_pack[vec_pack(normalize_vec(v))];
    }

    g.hyperplanes = g.points;
    g.hyp_members.resize(g.num_points);
    g.point_hyps.resize(g.num_points);
    for (int h = 0; h < g.num_points; ++h) {
        for (int p = 0; p < g.num_points; ++p) {
            if (vec_dot(g.hyperplanes[h], g.points[p]) == GF_0) {
                g.hyp_members[h].set(p);
                g.point_hyps[p].set(h);
            }
        }
    }

    g.third.resize(static_cast<std::size_t>(g.num_points) * g.num_points);
    for (int p = 0; p < g.num_points; ++p) {
        for (int q = p + 1; q < g.num_points; ++q) {
            std::array<PointIndex, 3> t;
            int k = 0;
            for (Gf4 lam = GF_1; lam <= GF_W2; ++lam) {
                Vec w = vec_add(g.points[p], vec_scale(g.points[q], lam));
                t[k++] = g.index_by_pack[vec_pack(w)];
            }
            std::sort(t.begin(), t.end());
            g.third[static_cast<std::size_t>(p) * g.num_points + q] = t;
            g.third[static_cast<std::size_t>(q) * g.num_points + p] = t;
        }
    }

    std::uint64_t d = fnv1a_u64(static_cast<std::uint64_t>(r));
    for (const Vec& v : g.points) d = fnv1a_u64(vec_pack(v), d);
    g.digest = d;
    return g;
}

PointIndex GeometryTables::point_index(const Vec& v) const {
    if (static_cast<int>(v.n) != r + 1) throw std::invalid_argument("point_index: wrong vector length");
    if (vec_is_zero(v)) throw std::domain_error("point_index: zero vector");
    return index_by_pack[vec_pack(v)];
}

const std::array<PointIndex, 3>& GeometryTables::residual_points(PointIndex p, PointIndex q) const {
    if (p == q) throw std::domain_error("residual_points: coincident points");
    return third[static_cast<std::size_t>(p) * num_points + q];
}

bool GeometryTables::is_collinear(PointIndex p, PointIndex q, PointIndex s) const {
    if (p == q || p == s || q == s) throw std::domain_error("is_collinear: points must be distinct");
    const auto& t = residual_points(p, q);
    return t[0] == s || t[1] == s || t[2] == s;
}

PointIndex embed_point(const GeometryTables& lo, const GeometryTables& hi, PointIndex p) {
    if (hi.r != lo.r + 1) throw std::invalid_argument("embed_point: dimensions must differ by 1");
    Vec v = lo.points[p];
    v.n = static_cast<std::uint8_t>(hi.r + 1);
    v.c[hi.r] = GF_0;
    return hi.point_index(v);
}

}  // namespace qcaps
