#include "qcaps/equivalence.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "qcaps/digest.hpp"

namespace qcaps {

namespace {

int mat_rank(const Mat5& m, int dim) {
    std::array<Vec, 5> rows;
    for (int i = 0; i < dim; ++i) {
        rows[static_cast<std::size_t>(i)].n = static_cast<std::uint8_t>(dim);
        for (int j = 0; j < dim; ++j) rows[static_cast<std::size_t>(i)].c[j] = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return gf4_rank(rows.begin(), rows.begin() + dim);
}

// Gauss-Jordan inverse; callers guarantee invertibility.
Mat5 mat_inverse(const Mat5& m, int dim) {
    std::array<std::array<Gf4, 10>, 5> a{};
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) a[i][j] = m[i][j];
        a[i][dim + i] = GF_1;
    }
    for (int col = 0; col < dim; ++col) {
        int piv = col;
        while (piv < dim && a[piv][col] == GF_0) ++piv;
        if (piv == dim) throw std::invalid_argument("mat_inverse: singular matrix");
        std::swap(a[piv], a[col]);
        Gf4 inv = kGf4Inv[a[col][col]];
        for (int j = 0; j < 2 * dim; ++j) a[col][j] = gf4_mul(a[col][j], inv);
        for (int i = 0; i < dim; ++i) {
            if (i == col || a[i][col] == GF_0) continue;
            Gf4 f = a[i][col];
            for (int j = 0; j < 2 * dim; ++j) a[i][j] = gf4_add(a[i][j], gf4_mul(f, a[col][j]));
        }
    }
    Mat5 r{};
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) r[i][j] = a[i][dim + j];
    return r;
}

Mat5 mat_mul(const Mat5& a, const Mat5& b, int dim) {
    Mat5 r{};
    for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) {
            Gf4 aik = a[i][k];
            if (aik == GF_0) continue;
            for (int j = 0; j < dim; ++j) r[i][j] = gf4_add(r[i][j], gf4_mul(aik, b[k][j]));
        }
    return r;
}

Mat5 mat_conj(const Mat5& m, int dim) {
    Mat5 r{};
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) r[i][j] = gf4_conj(m[i][j]);
    return r;
}

}  // namespace

Vec Collineation::apply_vec(const Vec& v) const {
    Vec u = frobenius ? vec_conj(v) : v;
    Vec w;
    w.n = static_cast<std::uint8_t>(dim);
    for (int i = 0; i < dim; ++i) {
        Gf4 s = GF_0;
        for (int j = 0; j < dim; ++j) s = gf4_add(s, gf4_mul(m[i][j], u.c[j]));
        w.c[i] = s;
    }
    return w;
}

Collineation make_collineation(int dim, const Mat5& m, bool frobenius) {
    if (mat_rank(m, dim) != dim) throw std::invalid_argument("make_collineation: singular matrix");
    return Collineation{dim, m, frobenius};
}

Collineation identity_collineation(int dim) {
    if (dim < 1 || dim > 5) throw std::invalid_argument("identity_collineation: bad dimension");
    Mat5 m{};
    for (std::size_t i = 0; i < static_cast<std::size_t>(dim); ++i) m[i][i] = GF_1;
    return Collineation{dim, m, false};
}

Collineation compose(const Collineation& a, const Collineation& b) {
    if (a.dim != b.dim) throw std::invalid_argument("compose: dimension mismatch");
    Mat5 rb = a.frobenius ? mat_conj(b.m, a.dim) : b.m;
    return Collineation{a.dim, mat_mul(a.m, rb, a.dim), a.frobenius != b.frobenius};
}

Collineation inverse(const Collineation& s) {
    Mat5 mi = mat_inverse(s.m, s.dim);
    if (s.frobenius) mi = mat_conj(mi, s.dim);
    return Collineation{s.dim, mi, s.frobenius};
}

PointIndex apply_point(const GeometryTables& g, const Collineation& s, PointIndex p) {
    return g.index_by_pack[vec_pack(s.apply_vec(g.points[p]))];
}

Cap apply(const Collineation& s, const Cap& cap) {
    if (s.dim != cap.geo->r + 1) throw std::invalid_argument("apply: dimension mismatch");
    Cap img = Cap::empty(*cap.geo);
    cap.members.for_each([&](int p) { img.members.set(apply_point(*cap.geo, s, static_cast<PointIndex>(p))); });
    img.size = img.members.count();
    if (img.size != cap.size) throw std::logic_error("apply: collineation not injective on points");
    return img;
}

Collineation random_collineation(const GeometryTables& g, std::mt19937_64& rng) {
    const int dim = g.r + 1;
    std::uniform_int_distribution<int> coin(0, 1), elem(0, 3);
    while (true) {
        Mat5 m{};
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) m[i][j] = static_cast<Gf4>(elem(rng));
        if (mat_rank(m, dim) == dim) return Collineation{dim, m, coin(rng) == 1};
    }
}

std::uint64_t InvariantSignature::hash() const {
    std::uint64_t h = kFnvOffset;
    for (auto x : hyp_spectrum) h = fnv1a_u64(x, h);
    h = fnv1a_u64(0xabcdu, h);
    for (auto x : degree_spectrum) h = fnv1a_u64(x, h);
    return h;
}

InvariantSignature signature(const Cap& cap) {
    const GeometryTables& g = *cap.geo;
    InvariantSignature s;
    s.hyp_spectrum.reserve(static_cast<std::size_t>(g.num_points));
    for (int h = 0; h < g.num_points; ++h)
        s.hyp_spectrum.push_back(static_cast<std::uint8_t>(cap.members.intersection_count(g.hyp_members[h])));
    std::sort(s.hyp_spectrum.begin(), s.hyp_spectrum.end());

    auto pts = cap.point_list();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::uint16_t deg = 0;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i == j) continue;
            const auto& t = g.residual_points(pts[i], pts[j]);
            bool pure = !cap.members.test(t[0]) && !cap.members.test(t[1]) && !cap.members.test(t[2]);
            deg += pure;
        }
        s.degree_spectrum.push_back(deg);
    }
    std::sort(s.degree_spectrum.begin(), s.degree_spectrum.end());
    return s;
}

namespace {

// Per-point incidence invariant: hash of the sorted multiset of hyperplane
// section sizes over the hyperplanes through the point. Equal for points
// related by a collineation mapping one cap onto the other.
std::vector<std::uint64_t> point_invariants(const Cap& cap, const std::vector<PointIndex>& pts) {
    const GeometryTables& g = *cap.geo;
    std::vector<std::vector<std::uint8_t>> secs(pts.size());
    for (int h = 0; h < g.num_points; ++h) {
        int s = cap.members.intersection_count(g.hyp_members[h]);
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (g.hyp_members[h].test(pts[i])) secs[i].push_back(static_cast<std::uint8_t>(s));
    }
    std::vector<std::uint64_t> inv(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::sort(secs[i].begin(), secs[i].end());
        std::uint64_t h = kFnvOffset;
        for (auto x : secs[i]) h = fnv1a_u64(x, h);
        inv[i] = h;
    }
    return inv;
}

struct DeterminedPoint {
    PointIndex point;
    std::array<Gf4, 5> coeff;  // in the reference basis; entries above level are 0
};

enum class WitnessMode { First, Count, Collect };

// Frame-mapping backtracking over semilinear maps span(a) -> span(b).
struct WitnessSearch {
    const GeometryTables& g;
    const Cap& a;
    const Cap& b;
    WitnessMode mode;

    int dim;
    int s = 0;                              // rank of a (== rank of b or no witness)
    std::vector<PointIndex> ref;            // rank-increasing tuple from a
    std::vector<std::vector<DeterminedPoint>> determined;  // by level
    std::vector<PointIndex> bpts;
    std::vector<std::uint64_t> inv_ref;     // invariant of ref[j]
    std::vector<std::uint64_t> inv_b;       // invariant of bpts[i]

    bool frob = false;
    std::array<Vec, 5> img;                 // img[j] = lambda_j * vec(c_j)
    std::array<Vec, 5> echelon;             // reduced image vectors, for rank checks
    std::array<PointIndex, 5> chosen{};

    std::uint64_t found = 0;
    std::optional<Collineation> witness;
    std::vector<Collineation> collected;

    WitnessSearch(const Cap& a_, const Cap& b_, WitnessMode mode_)
        : g(*a_.geo), a(a_), b(b_), mode(mode_), dim(a_.geo->r + 1) {}

    // Reduce v against echelon rows [0, cnt); returns reduced vector.
    Vec reduce(Vec v, int cnt) const {
        for (int i = 0; i < cnt; ++i) {
            const Vec& row = echelon[static_cast<std::size_t>(i)];
            std::uint8_t piv = 0;
            while (piv < row.n && row.c[piv] == GF_0) ++piv;
            if (piv < row.n && v.c[piv] != GF_0)
                v = vec_add(v, vec_scale(row, gf4_mul(v.c[piv], kGf4Inv[row.c[piv]])));
        }
        return v;
    }

    bool prepare() {
        if (a.size != b.size) return false;
        auto apts = a.point_list();
        bpts = b.point_list();

        // greedy rank-increasing reference tuple
        std::vector<Vec> basis;
        std::vector<char> in_ref(apts.size(), 0);
        for (std::size_t i = 0; i < apts.size(); ++i) {
            std::vector<Vec> trial = basis;
            trial.push_back(g.points[apts[i]]);
            if (gf4_rank(trial.begin(), trial.end()) > static_cast<int>(basis.size())) {
                basis = std::move(trial);
                ref.push_back(apts[i]);
                in_ref[i] = 1;
            }
        }
        s = static_cast<int>(ref.size());
        {
            std::vector<Vec> bvecs;
            for (PointIndex p : bpts) bvecs.push_back(g.points[p]);
            if (gf4_rank(bvecs.begin(), bvecs.end()) != s) return false;
        }

        // coefficients of every non-reference point of a in the ref basis
        determined.assign(static_cast<std::size_t>(s), {});
        for (std::size_t i = 0; i < apts.size(); ++i) {
            if (in_ref[i]) continue;
            std::array<Gf4, 5> x{};
            if (!solve_in_basis(g.points[apts[i]], x)) return false;  // cannot happen
            int level = 0;
            for (int j = 0; j < s; ++j)
                if (x[static_cast<std::size_t>(j)] != GF_0) level = j;
            determined[static_cast<std::size_t>(level)].push_back({apts[i], x});
        }

        // incidence invariants; multiset equality is necessary for equivalence
        auto inv_a_all = point_invariants(a, apts);
        inv_b = point_invariants(b, bpts);
        {
            std::vector<std::uint64_t> sa = inv_a_all, sb = inv_b;
            std::sort(sa.begin(), sa.end());
            std::sort(sb.begin(), sb.end());
            if (sa != sb) return false;
        }
        inv_ref.resize(static_cast<std::size_t>(s));
        for (int j = 0; j < s; ++j) {
            for (std::size_t i = 0; i < apts.size(); ++i)
                if (apts[i] == ref[static_cast<std::size_t>(j)]) inv_ref[static_cast<std::size_t>(j)] = inv_a_all[i];
        }
        return true;
    }

    // Solve ref-basis expansion: sum_j x_j * vec(ref_j) = v.
    bool solve_in_basis(const Vec& v, std::array<Gf4, 5>& x) const {
        // Gaussian elimination on [R | v] with R columns = ref vectors.
        std::array<std::array<Gf4, 6>, 5> aug{};
        for (int row = 0; row < dim; ++row) {
            for (int j = 0; j < s; ++j) aug[row][j] = g.points[ref[static_cast<std::size_t>(j)]].c[row];
            aug[row][s] = v.c[row];
        }
        int prow = 0;
        std::array<int, 5> pivot_of_col{};
        pivot_of_col.fill(-1);
        for (int col = 0; col < s && prow < dim; ++col) {
            int piv = prow;
            while (piv < dim && aug[piv][col] == GF_0) ++piv;
            if (piv == dim) continue;
            std::swap(aug[piv], aug[prow]);
            Gf4 inv = kGf4Inv[aug[prow][col]];
            for (int j = 0; j <= s; ++j) aug[prow][j] = gf4_mul(aug[prow][j], inv);
            for (int i = 0; i < dim; ++i) {
                if (i == prow || aug[i][col] == GF_0) continue;
                Gf4 f = aug[i][col];
                for (int j = 0; j <= s; ++j) aug[i][j] = gf4_add(aug[i][j], gf4_mul(f, aug[prow][j]));
            }
            pivot_of_col[static_cast<std::size_t>(col)] = prow;
            ++prow;
        }
        for (int i = prow; i < dim; ++i)
            if (aug[i][s] != GF_0) return false;  // inconsistent: v outside span
        x.fill(GF_0);
        for (int col = 0; col < s; ++col)
            if (pivot_of_col[static_cast<std::size_t>(col)] >= 0) x[static_cast<std::size_t>(col)] = aug[pivot_of_col[static_cast<std::size_t>(col)]][s];
        return true;
    }

    bool determined_ok(int level) const {
        for (const DeterminedPoint& dp : determined[static_cast<std::size_t>(level)]) {
            Vec w{};
            w.n = static_cast<std::uint8_t>(dim);
            for (int i = 0; i <= level; ++i) {
                Gf4 coef = dp.coeff[static_cast<std::size_t>(i)];
                if (frob) coef = gf4_conj(coef);
                if (coef != GF_0) w = vec_add(w, vec_scale(img[static_cast<std::size_t>(i)], coef));
            }
            PointIndex ip = g.index_by_pack[vec_pack(w)];
            if (!b.members.test(ip)) return false;
        }
        return true;
    }

    // Canonically extend the span map to a full invertible matrix.
    Collineation build_full() const {
        std::vector<Vec> dom, im;
        for (int j = 0; j < s; ++j) {
            Vec r = g.points[ref[static_cast<std::size_t>(j)]];
            dom.push_back(frob ? vec_conj(r) : r);
            im.push_back(img[static_cast<std::size_t>(j)]);
        }
        auto complete = [&](std::vector<Vec>& vs) {
            for (int t = 0; t < dim && static_cast<int>(vs.size()) < dim; ++t) {
                Vec e{};
                e.n = static_cast<std::uint8_t>(dim);
                e.c[t] = GF_1;
                std::vector<Vec> trial = vs;
                trial.push_back(e);
                if (gf4_rank(trial.begin(), trial.end()) == static_cast<int>(trial.size())) vs = std::move(trial);
            }
        };
        complete(dom);
        complete(im);

        Mat5 dmat{}, imat{};
        for (int j = 0; j < dim; ++j)
            for (int i = 0; i < dim; ++i) {
                dmat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = dom[static_cast<std::size_t>(j)].c[i];
                imat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = im[static_cast<std::size_t>(j)].c[i];
            }
        Mat5 m = mat_mul(imat, mat_inverse(dmat, dim), dim);
        return Collineation{dim, m, frob};
    }

    // Returns true when the search should stop (First mode, witness found).
    bool complete_leaf() {
        Collineation full = build_full();
        Cap image = apply(full, a);
        if (!(image.members == b.members))
            throw std::logic_error("witness search: completed assignment fails full verification");
        ++found;
        if (mode == WitnessMode::First) {
            witness = full;
            return true;
        }
        if (mode == WitnessMode::Collect) collected.push_back(full);
        return false;
    }

    bool descend(int level) {
        if (level == s) return complete_leaf();
        for (std::size_t ci = 0; ci < bpts.size(); ++ci) {
            if (inv_b[ci] != inv_ref[static_cast<std::size_t>(level)]) continue;
            PointIndex c = bpts[ci];
            Vec cv = g.points[c];
            Vec red = reduce(cv, level);
            if (vec_is_zero(red)) continue;  // dependent on chosen images
            echelon[static_cast<std::size_t>(level)] = red;
            chosen[static_cast<std::size_t>(level)] = c;
            const Gf4 lam_from = GF_1;
            const Gf4 lam_to = level == 0 ? GF_1 : GF_W2;
            for (Gf4 lam = lam_from; lam <= lam_to; ++lam) {
                img[static_cast<std::size_t>(level)] = vec_scale(cv, lam);
                if (!determined_ok(level)) continue;
                if (descend(level + 1)) return true;
            }
        }
        return false;
    }

    void run() {
        if (a.size == 0) {
            // empty caps: every collineation works; report identity once
            if (b.size == 0) {
                ++found;
                if (mode == WitnessMode::First) witness = identity_collineation(dim);
                if (mode == WitnessMode::Collect) collected.push_back(identity_collineation(dim));
            }
            return;
        }
        if (!prepare()) return;
        for (int f = 0; f < 2; ++f) {
            frob = f == 1;
            if (descend(0)) return;
        }
    }
};

}  // namespace

std::optional<Collineation> are_equivalent(const Cap& a, const Cap& b) {
    if (a.geo != b.geo) throw std::invalid_argument("are_equivalent: different geometries");
    if (a.size != b.size) throw std::invalid_argument("are_equivalent: different sizes");
    if (!(signature(a) == signature(b))) return std::nullopt;
    WitnessSearch ws(a, b, WitnessMode::First);
    ws.run();
    return ws.witness;
}

std::uint64_t stabilizer_order(const Cap& cap) {
    if (cap.size < 1) throw std::domain_error("stabilizer_order: cap must be nonempty");
    WitnessSearch ws(cap, cap, WitnessMode::Count);
    ws.run();
    return ws.found;
}

std::vector<Collineation> stabilizer_elements(const Cap& cap) {
    if (cap.size < 1) throw std::domain_error("stabilizer_elements: cap must be nonempty");
    WitnessSearch ws(cap, cap, WitnessMode::Collect);
    ws.run();
    return ws.collected;
}

std::vector<CapClass> classify(std::span<const Cap> caps) {
    struct Entry {
        InvariantSignature sig;
        std::uint64_t fine = 0;  // sorted point-invariant multiset hash
        Cap first;               // witness-search anchor
        PointMask min_mask;
        std::uint64_t count = 0;
    };

    auto fine_hash = [](const Cap& c) {
        auto pts = c.point_list();
        auto inv = point_invariants(c, pts);
        std::sort(inv.begin(), inv.end());
        std::uint64_t h = kFnvOffset;
        for (auto x : inv) h = fnv1a_u64(x, h);
        return h;
    };

    std::unordered_map<std::uint64_t, std::vector<Entry>> buckets;
    const GeometryTables* geo = nullptr;
    for (const Cap& c : caps) {
        if (!geo) geo = c.geo;
        if (c.geo != geo) throw std::invalid_argument("classify: mixed geometries");
        InvariantSignature sig = signature(c);
        std::uint64_t fine = fine_hash(c);
        auto& bucket = buckets[sig.hash()];
        bool placed = false;
        for (Entry& e : bucket) {
            if (e.fine != fine || !(e.sig == sig)) continue;
            if (are_equivalent(c, e.first)) {
                ++e.count;
                if (mask_lex_less(c.members, e.min_mask)) e.min_mask = c.members;
                placed = true;
                break;
            }
        }
        if (!placed) bucket.push_back(Entry{std::move(sig), fine, c, c.members, 1});
    }

    std::vector<CapClass> out;
    for (auto& [h, bucket] : buckets) {
        for (Entry& e : bucket) {
            Cap rep = Cap::from_mask(*geo, e.min_mask);
            CapClass cc;
            cc.count = e.count;
            cc.stabilizer_order = rep.size > 0 ? stabilizer_order(rep) : 0;
            cc.complete = is_complete(rep);
            cc.representative = std::move(rep);
            out.push_back(std::move(cc));
        }
    }
    std::sort(out.begin(), out.end(), [](const CapClass& x, const CapClass& y) {
        return mask_lex_less(x.representative.members, y.representative.members);
    });
    return out;
}

}  // namespace qcaps
