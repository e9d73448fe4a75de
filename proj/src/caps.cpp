#include "qcaps/caps.hpp"

#include <stdexcept>

namespace qcaps {

Cap Cap::from_points(const GeometryTables& g, std::span<const PointIndex> pts) {
    Cap c{&g, PointMask{}, 0};
    for (PointIndex p : pts) {
        if (p >= g.num_points) throw std::domain_error("Cap::from_points: index out of range");
        if (c.members.test(p)) throw std::domain_error("Cap::from_points: duplicate point");
        c.members.set(p);
    }
    c.size = static_cast<int>(pts.size());
    return c;
}

std::vector<PointIndex> Cap::point_list() const {
    std::vector<PointIndex> v;
    v.reserve(static_cast<std::size_t>(size));
    members.for_each([&](int i) { v.push_back(static_cast<PointIndex>(i)); });
    return v;
}

std::optional<CollinearTriple> find_collinear_triple(const GeometryTables& g,
                                                     std::span<const PointIndex> pts) {
    PointMask members, excluded;
    std::vector<PointIndex> placed;
    placed.reserve(pts.size());
    for (PointIndex p : pts) {
        if (members.test(p)) return CollinearTriple{p, p, p};  // duplicate, degenerate
        if (excluded.test(p)) {
            // find a witness pair among the placed points
            for (std::size_t i = 0; i < placed.size(); ++i) {
                for (std::size_t j = i + 1; j < placed.size(); ++j) {
                    if (g.is_collinear(placed[i], placed[j], p))
                        return CollinearTriple{placed[i], placed[j], p};
                }
            }
            return CollinearTriple{p, p, p};  // unreachable for consistent tables
        }
        for (PointIndex m : placed) {
            const auto& t = g.residual_points(m, p);
            excluded.set(t[0]);
            excluded.set(t[1]);
            excluded.set(t[2]);
        }
        members.set(p);
        placed.push_back(p);
    }
    return std::nullopt;
}

bool is_cap(const GeometryTables& g, std::span<const PointIndex> pts) {
    return !find_collinear_triple(g, pts).has_value();
}

bool is_cap(const Cap& cap) {
    auto pts = cap.point_list();
    return is_cap(*cap.geo, pts);
}

ExtensionState ExtensionState::build(const Cap& cap) {
    ExtensionState st;
    st.cap = cap;
    auto pts = cap.point_list();
    const GeometryTables& g = *cap.geo;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const auto& t = g.residual_points(pts[i], pts[j]);
            st.excluded.set(t[0]);
            st.excluded.set(t[1]);
            st.excluded.set(t[2]);
        }
    }
    st.excluded = st.excluded.andnot(cap.members);
    st.candidates = g.universe.andnot(cap.members | st.excluded);
    return st;
}

void ExtensionState::add_point(PointIndex p) {
    if (!candidates.test(p)) throw std::logic_error("ExtensionState::add_point: not a candidate");
    const GeometryTables& g = *cap.geo;
    cap.members.for_each([&](int m) {
        const auto& t = g.residual_points(static_cast<PointIndex>(m), p);
        excluded.set(t[0]);
        excluded.set(t[1]);
        excluded.set(t[2]);
    });
    cap.members.set(p);
    cap.size += 1;
    excluded = excluded.andnot(cap.members);
    candidates = g.universe.andnot(cap.members | excluded);
}

bool ExtensionState::matches_rebuild() const {
    ExtensionState fresh = build(cap);
    return fresh.excluded == excluded && fresh.candidates == candidates;
}

bool is_complete(const Cap& cap) {
    return ExtensionState::build(cap).candidates.empty();
}

Cap embed_cap(const GeometryTables& lo, const GeometryTables& hi, const Cap& seed) {
    Cap out = Cap::empty(hi);
    seed.members.for_each([&](int p) { out.members.set(embed_point(lo, hi, static_cast<PointIndex>(p))); });
    out.size = seed.size;
    return out;
}

}  // namespace qcaps
