#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "qcaps/codes.hpp"
#include "qcaps/equivalence.hpp"
#include "qcaps/pipeline.hpp"

using namespace qcaps;

namespace {

const GeometryTables& pg(int r) {
    static GeometryTables g2 = GeometryTables::build(2);
    static GeometryTables g3 = GeometryTables::build(3);
    static GeometryTables g4 = GeometryTables::build(4);
    return r == 2 ? g2 : r == 3 ? g3 : g4;
}

Cap frame_cap(const GeometryTables& g) {
    std::vector<PointIndex> pts;
    for (int i = 0; i <= g.r; ++i) {
        Vec e{};
        e.n = static_cast<std::uint8_t>(g.r + 1);
        e.c[i] = GF_1;
        pts.push_back(g.point_index(e));
    }
    Vec ones{};
    ones.n = static_cast<std::uint8_t>(g.r + 1);
    for (int i = 0; i <= g.r; ++i) ones.c[i] = GF_1;
    pts.push_back(g.point_index(ones));
    return Cap::from_points(g, pts);
}

// Independent weight counter: re-derives each codeword coordinate with its
// own message/coordinate loops, no shared helpers with the implementation.
std::vector<std::uint64_t> naive_weights(const GeneratorMatrix& g) {
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(g.n) + 1, 0);
    std::vector<int> msg(static_cast<std::size_t>(g.k), 0);
    while (true) {
        int wt = 0;
        for (int j = 0; j < g.n; ++j) {
            Gf4 sym = GF_0;
            for (int i = 0; i < g.k; ++i)
                sym = gf4_add(sym, gf4_mul(static_cast<Gf4>(msg[static_cast<std::size_t>(i)]),
                                           g.cols[static_cast<std::size_t>(j)].c[i]));
            if (sym != GF_0) ++wt;
        }
        ++counts[static_cast<std::size_t>(wt)];
        int i = 0;
        while (i < g.k && msg[static_cast<std::size_t>(i)] == 3) msg[static_cast<std::size_t>(i++)] = 0;
        if (i == g.k) break;
        ++msg[static_cast<std::size_t>(i)];
    }
    return counts;
}

// Exhaustive subset-rank strength, the brute-force oracle.
int naive_strength(const GeneratorMatrix& g, int limit) {
    for (int t = 1; t <= limit && t <= g.n; ++t) {
        std::vector<int> idx(static_cast<std::size_t>(t));
        for (int i = 0; i < t; ++i) idx[static_cast<std::size_t>(i)] = i;
        while (true) {
            std::vector<Vec> sub;
            for (int i : idx) sub.push_back(g.cols[static_cast<std::size_t>(i)]);
            if (gf4_rank(sub.begin(), sub.end()) < t) return t - 1;
            int i = t - 1;
            while (i >= 0 && idx[static_cast<std::size_t>(i)] == g.n - t + i) --i;
            if (i < 0) break;
            ++idx[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < t; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    return std::min(limit, g.n);
}

Cap random_cap(const GeometryTables& g, int target, std::mt19937_64& rng) {
    while (true) {
        ExtensionState st = ExtensionState::build(Cap::empty(g));
        while (st.cap.size < target) {
            int n = st.candidates.count();
            if (n == 0) break;
            std::uniform_int_distribution<int> pick(0, n - 1);
            int k = pick(rng), p = -1;
            st.candidates.for_each([&](int i) {
                if (k-- == 0) p = i;
            });
            st.add_point(static_cast<PointIndex>(p));
        }
        if (st.cap.size == target) return st.cap;
    }
}

}  // namespace

TEST_CASE("generator matrix layout and determinism") {
    const GeometryTables& g = pg(4);
    Cap single = Cap::from_points(g, std::vector<PointIndex>{g.point_index(make_vec({1, 0, 0, 0, 0}))});
    GeneratorMatrix m1 = generator_from_cap(single);
    CHECK(m1.k == 5);
    CHECK(m1.n == 1);
    CHECK(m1.cols[0] == make_vec({1, 0, 0, 0, 0}));

    Cap frame = frame_cap(g);
    GeneratorMatrix mf = generator_from_cap(frame);
    CHECK(mf.n == 6);
    // columns ascend by point index; the frame contains e0..e4 and the all-one
    // vector, whose lexicographic (= index) order is e4, e3, e2, e1, e0? No:
    // index order is coordinate-lex order.
    std::vector<std::string> got;
    for (const Vec& c : mf.cols) got.push_back(vec_to_string(c));
    std::vector<std::string> sorted = got;
    std::sort(sorted.begin(), sorted.end());
    CHECK(got == sorted);

    GeneratorMatrix again = generator_from_cap(frame);
    CHECK(again.cols == mf.cols);

    CHECK_THROWS_AS(generator_from_cap(Cap::empty(g)), std::domain_error);
}

TEST_CASE("single-point code weight distribution") {
    const GeometryTables& g = pg(4);
    Cap single = Cap::from_points(g, std::vector<PointIndex>{g.point_index(make_vec({1, 0, 0, 0, 0}))});
    WeightDistribution d = weight_distribution(generator_from_cap(single));
    CHECK(d.counts[0] == 256);
    CHECK(d.counts[1] == 768);
    CHECK_FALSE(all_weights_even(generator_from_cap(single)));
}

TEST_CASE("weight distribution sums to 4^k and matches the naive recount") {
    const GeometryTables& g = pg(4);
    Cap frame = frame_cap(g);
    GeneratorMatrix gm = generator_from_cap(frame);
    WeightDistribution d = weight_distribution(gm);
    std::uint64_t total = 0;
    for (auto c : d.counts) total += c;
    CHECK(total == 1024);
    CHECK(d.counts[0] == 1);
    CHECK(d.counts == naive_weights(gm));

    std::mt19937_64 rng(42);
    for (int it = 0; it < 20; ++it) {
        Cap c = random_cap(g, 4 + static_cast<int>(rng() % 17), rng);
        GeneratorMatrix m = generator_from_cap(c);
        CHECK(weight_distribution(m).counts == naive_weights(m));
    }
}

TEST_CASE("frame code has odd weights; message (1,w,0,0,0) has weight 3") {
    const GeometryTables& g = pg(4);
    GeneratorMatrix gm = generator_from_cap(frame_cap(g));
    CHECK_FALSE(all_weights_even(gm));
    // directly: codeword of message (1,w,0,0,0) over columns {e0..e4, ones}
    Vec msg = make_vec({1, 2, 0, 0, 0});
    int wt = 0;
    for (const Vec& col : gm.cols) wt += vec_dot(msg, col) != GF_0;
    CHECK(wt == 3);
    WeightDistribution d = weight_distribution(gm);
    CHECK(d.counts[3] > 0);
}

TEST_CASE("two-point cap fails hyperplane parity with an explicit witness") {
    const GeometryTables& g = pg(4);
    Cap two = Cap::from_points(g, std::vector<PointIndex>{0, 100});
    CHECK_FALSE(hyperplane_parity_ok(two));
    bool witness = false;
    for (int h = 0; h < g.num_points && !witness; ++h)
        witness = two.members.intersection_count(g.hyp_members[h]) == 1;
    CHECK(witness);
}

TEST_CASE("frame is not hermitian self-orthogonal: gram(0,1) = 1") {
    const GeometryTables& g = pg(4);
    GeneratorMatrix gm = generator_from_cap(frame_cap(g));
    CHECK_FALSE(hermitian_selforthogonal(gm));
    // row 0 and row 1 overlap exactly on the all-one column
    Gf4 g01 = GF_0;
    for (const Vec& col : gm.cols) g01 = gf4_add(g01, gf4_mul(col.c[0], gf4_conj(col.c[1])));
    CHECK(g01 == GF_1);
}

TEST_CASE("strength: caps have strength >= 3, collinear triples give 2") {
    const GeometryTables& g = pg(4);
    std::mt19937_64 rng(77);
    for (int it = 0; it < 30; ++it) {
        Cap c = random_cap(g, 4 + static_cast<int>(rng() % 17), rng);
        CHECK(strength(generator_from_cap(c), 3) == 3);
    }
    GeneratorMatrix planted;
    planted.k = 5;
    planted.n = 4;
    planted.cols = {make_vec({1, 0, 0, 0, 0}), make_vec({0, 1, 0, 0, 0}), make_vec({1, 1, 0, 0, 0}),
                    make_vec({0, 0, 1, 0, 0})};
    CHECK(strength(planted, 4) == 2);
}

TEST_CASE("strength of the frame matrix matches the exhaustive oracle up to limit 5") {
    GeneratorMatrix gm = generator_from_cap(frame_cap(pg(4)));
    for (int limit = 1; limit <= 5; ++limit) CHECK(strength(gm, limit) == naive_strength(gm, limit));
}

TEST_CASE("the embedded ovoid is a quantum cap with parameters [[17,7,4]]") {
    const GeometryTables& g3 = pg(3);
    const GeometryTables& g4 = pg(4);
    Cap embedded = embed_cap(g3, g4, ovoid_cap(g3));
    CodeProfile p = quantum_check(embedded);
    CHECK(p.even);
    CHECK(p.hermitian);
    CHECK(p.parity);
    CHECK(p.rank == 4);
    CHECK(p.strength == 3);
    REQUIRE(p.quantum.has_value());
    CHECK(p.quantum->n == 17);
    CHECK(p.quantum->k == 7);
    CHECK(p.quantum->d == 4);
}

TEST_CASE("quantum parameter arithmetic: k = n - 2(r+1)") {
    // a 37-point quantum cap in PG(4,4) would be a [[37,27,4]] code
    CHECK(37 - 2 * 5 == 27);
    CHECK(39 - 2 * 5 == 29);
}

TEST_CASE("frame profile: all three predicates false, no quantum parameters") {
    CodeProfile p = quantum_check(frame_cap(pg(4)));
    CHECK_FALSE(p.even);
    CHECK_FALSE(p.hermitian);
    CHECK_FALSE(p.parity);
    CHECK_FALSE(p.quantum.has_value());
    CHECK(p.rank == 5);
}

TEST_CASE("three-way predicate agreement on random caps") {
    const GeometryTables& g = pg(4);
    std::mt19937_64 rng(20260808);
    for (int it = 0; it < 200; ++it) {
        int size = 4 + static_cast<int>(rng() % 17);
        Cap c = random_cap(g, size, rng);
        CodeProfile p = quantum_check(c);  // throws CrossCheckError on disagreement
        CHECK(p.even == p.hermitian);
        CHECK(p.even == p.parity);
    }
}

TEST_CASE("weight distribution is invariant under column permutation and scaling") {
    const GeometryTables& g = pg(4);
    std::mt19937_64 rng(99);
    for (int it = 0; it < 10; ++it) {
        Cap c = random_cap(g, 8, rng);
        GeneratorMatrix m = generator_from_cap(c);
        GeneratorMatrix tweaked = m;
        std::shuffle(tweaked.cols.begin(), tweaked.cols.end(), rng);
        for (Vec& col : tweaked.cols)
            col = vec_scale(col, static_cast<Gf4>(1 + rng() % 3));
        CHECK(weight_distribution(m).counts == weight_distribution(tweaked).counts);
    }
}

TEST_CASE("hyperplane parity of PG(3,4) caps works in their own geometry") {
    Cap ov = ovoid_cap(pg(3));
    CHECK(hyperplane_parity_ok(ov));  // all ovoid plane sections are 1 or 5, both odd
}

TEST_CASE("a search-found 10-cap is a self-dual [[10,0,4]] quantum cap") {
    // found by this project's exploratory target-10 search (seed s4-c0)
    const GeometryTables& g = pg(4);
    std::vector<PointIndex> pts = {0, 1, 5, 10, 21, 41, 86, 126, 244, 268};
    Cap c = Cap::from_points(g, pts);
    REQUIRE(is_cap(c));
    CodeProfile p = quantum_check(c);
    CHECK(p.even);
    CHECK(p.hermitian);
    CHECK(p.parity);
    REQUIRE(p.quantum.has_value());
    CHECK(p.quantum->n == 10);
    CHECK(p.quantum->k == 0);
    CHECK(p.quantum->d == 4);
    CHECK(all_weights_even(generator_from_cap(c)));
}
