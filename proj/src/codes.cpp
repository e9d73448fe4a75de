#include "qcaps/codes.hpp"

#include <algorithm>

namespace qcaps {

GeneratorMatrix generator_from_cap(const Cap& cap) {
    if (cap.size == 0) throw std::domain_error("generator_from_cap: empty cap");
    GeneratorMatrix g;
    g.k = cap.geo->r + 1;
    g.n = cap.size;
    g.cols.reserve(static_cast<std::size_t>(cap.size));
    cap.members.for_each([&](int p) { g.cols.push_back(cap.geo->points[p]); });
    return g;
}

WeightDistribution weight_distribution(const GeneratorMatrix& g) {
    if (g.k > kMaxEnumerationK)
        throw std::length_error("weight_distribution: k exceeds enumeration limit");
    WeightDistribution d;
    d.counts.assign(static_cast<std::size_t>(g.n) + 1, 0);
    const std::uint32_t nmsgs = 1u << (2 * g.k);
    for (std::uint32_t m = 0; m < nmsgs; ++m) {
        Vec msg;
        msg.n = static_cast<std::uint8_t>(g.k);
        for (int i = 0; i < g.k; ++i) msg.c[i] = static_cast<Gf4>((m >> (2 * i)) & 3);
        int wt = 0;
        for (const Vec& col : g.cols) wt += vec_dot(msg, col) != GF_0;
        ++d.counts[static_cast<std::size_t>(wt)];
    }
    return d;
}

bool all_weights_even(const GeneratorMatrix& g) {
    WeightDistribution d = weight_distribution(g);
    for (std::size_t w = 1; w < d.counts.size(); w += 2)
        if (d.counts[w] != 0) return false;
    return true;
}

bool hyperplane_parity_ok(const Cap& cap) {
    const GeometryTables& g = *cap.geo;
    const int par = cap.size & 1;
    for (int h = 0; h < g.num_points; ++h) {
        if ((cap.members.intersection_count(g.hyp_members[h]) & 1) != par) return false;
    }
    return true;
}

bool hermitian_selforthogonal(const GeneratorMatrix& g) {
    for (int i = 0; i < g.k; ++i) {
        for (int j = i; j < g.k; ++j) {
            Gf4 s = GF_0;
            for (const Vec& col : g.cols) s = gf4_add(s, gf4_mul(col.c[i], gf4_conj(col.c[j])));
            if (s != GF_0) return false;
        }
    }
    return true;
}

namespace {

// Any t-subset of columns with rank < t ends the scan early.
bool all_subsets_independent(const GeneratorMatrix& g, int t) {
    std::vector<int> idx(static_cast<std::size_t>(t));
    std::vector<Vec> sub(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
        for (int i = 0; i < t; ++i) sub[static_cast<std::size_t>(i)] = g.cols[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
        if (gf4_rank(sub.begin(), sub.end()) < t) return false;
        int i = t - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == g.n - t + i) --i;
        if (i < 0) return true;
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < t; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
}

}  // namespace

int strength(const GeneratorMatrix& g, int limit) {
    if (limit < 1) throw std::invalid_argument("strength: limit must be >= 1");
    int t = 0;
    while (t < limit && t < g.n) {
        if (!all_subsets_independent(g, t + 1)) break;
        ++t;
    }
    return t;
}

CodeProfile quantum_check(const Cap& cap) {
    CodeProfile p;
    p.n = cap.size;
    p.k = cap.geo->r + 1;
    if (cap.size == 0) {
        p.rank = 0;
        return p;
    }

    GeneratorMatrix g = generator_from_cap(cap);
    p.rank = gf4_rank(g.cols.begin(), g.cols.end());
    p.even = all_weights_even(g);
    p.hermitian = hermitian_selforthogonal(g);
    p.parity = hyperplane_parity_ok(cap);

    if (p.even != p.hermitian || p.even != p.parity) {
        throw CrossCheckError(
            "quantum_check: equivalent predicates disagree (even=" + std::to_string(p.even) +
            " hermitian=" + std::to_string(p.hermitian) + " parity=" + std::to_string(p.parity) +
            ") on a cap of size " + std::to_string(cap.size));
    }

    p.strength = strength(g, kDefaultStrengthLimit);
    if (p.even) {
        int kq = p.n - 2 * p.k;
        if (kq >= 0) p.quantum = QuantumParams{p.n, kq, p.strength + 1};
    }
    return p;
}

}  // namespace qcaps
