#include "qcaps/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "qcaps/capfile.hpp"
#include "qcaps/digest.hpp"

namespace qcaps {

namespace {
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}
}  // namespace

// ---------------------------------------------------------------------------
// Seed sizes.

std::span<const SectionBoundFact> known_section_bounds() {
    // codetables.de: no [37,5,>25] and no [39,5,>27] codes over GF(4), so a
    // hyperplane with at least 12 points exists under any spanning cap of
    // these sizes.
    static const SectionBoundFact facts[] = {
        {37, 12, "codetables.de: [37,5,d] over GF(4) requires d <= 25"},
        {39, 12, "codetables.de: [39,5,d] over GF(4) requires d <= 27"},
    };
    return facts;
}

int max_cap_size(int dim) {
    switch (dim) {
        case 1: return 2;   // a line
        case 2: return 6;   // hyperoval
        case 3: return 17;  // elliptic quadric
        default: throw std::invalid_argument("max_cap_size: unsupported dimension");
    }
}

std::vector<int> admissible_seed_sizes(int target, bool exploratory, int ambient_r) {
    if (target < 1) throw std::invalid_argument("admissible_seed_sizes: target must be positive");
    const auto bounds = known_section_bounds();
    const SectionBoundFact* fact = nullptr;
    for (const auto& f : bounds)
        if (f.n == target) fact = &f;
    if (!exploratory && !fact)
        throw std::invalid_argument("admissible_seed_sizes: no section bound on record for target " +
                                    std::to_string(target) + "; use exploratory mode");

    int lower;
    if (fact) {
        lower = fact->bound;
    } else {
        // Any min(n, r) points lie in a common hyperplane, and the average
        // section size over all hyperplanes is n * (4^r - 1) / (4^(r+1) - 1).
        int hyps_total = ((1 << (2 * (ambient_r + 1))) - 1) / 3;
        int hyps_thru_point = ((1 << (2 * ambient_r)) - 1) / 3;
        int avg_ceil = (target * hyps_thru_point + hyps_total - 1) / hyps_total;
        lower = std::max(std::min(target, ambient_r), avg_ceil);
    }
    if ((lower & 1) != (target & 1)) ++lower;  // sections share the target's parity
    int upper = std::min(max_cap_size(ambient_r - 1), target);

    std::vector<int> sizes;
    for (int s = lower; s <= upper; s += 2) sizes.push_back(s);
    return sizes;
}

// ---------------------------------------------------------------------------
// Generation of cap classes.

Cap ovoid_cap(const GeometryTables& g3) {
    if (g3.r != 3) throw std::invalid_argument("ovoid_cap: needs PG(3,4)");
    Cap c = Cap::empty(g3);
    for (int p = 0; p < g3.num_points; ++p) {
        const Vec& v = g3.points[p];
        // x0*x1 + x2^2 + x2*x3 + w*x3^2
        Gf4 q = gf4_add(gf4_mul(v.c[0], v.c[1]),
                        gf4_add(gf4_mul(v.c[2], v.c[2]),
                                gf4_add(gf4_mul(v.c[2], v.c[3]), gf4_mul(GF_W, gf4_mul(v.c[3], v.c[3])))));
        if (q == GF_0) c.members.set(p);
    }
    c.size = c.members.count();
    return c;
}

namespace {

// Mask of all points in the projective span of the cap's points.
PointMask span_mask(const Cap& cap) {
    const GeometryTables& g = *cap.geo;
    std::vector<Vec> basis;
    cap.members.for_each([&](int p) {
        std::vector<Vec> trial = basis;
        trial.push_back(g.points[p]);
        if (gf4_rank(trial.begin(), trial.end()) > static_cast<int>(basis.size())) basis = std::move(trial);
    });
    PointMask m;
    const int s = static_cast<int>(basis.size());
    const std::uint32_t ncoef = 1u << (2 * s);
    for (std::uint32_t coef = 1; coef < ncoef; ++coef) {
        Vec v{};
        v.n = static_cast<std::uint8_t>(g.r + 1);
        for (int i = 0; i < s; ++i) {
            Gf4 ci = static_cast<Gf4>((coef >> (2 * i)) & 3);
            if (ci != GF_0) v = vec_add(v, vec_scale(basis[static_cast<std::size_t>(i)], ci));
        }
        m.set(g.index_by_pack[vec_pack(v)]);
    }
    return m;
}

// One candidate per orbit of the cap's stabilizer. In-span candidates fall
// into orbits of the group induced on the span; every off-span candidate is
// in one orbit because the pointwise stabilizer of the span is transitive
// off it.
std::vector<PointIndex> candidate_orbit_reps(const Cap& cap, const ExtensionState& st) {
    const GeometryTables& g = *cap.geo;
    std::vector<PointIndex> reps;
    if (cap.size == 0) {
        int p = st.candidates.find_first();
        if (p >= 0) reps.push_back(static_cast<PointIndex>(p));
        return reps;
    }
    PointMask span = span_mask(cap);
    PointMask in_span = st.candidates & span;
    PointMask off_span = st.candidates.andnot(span);

    if (!in_span.empty()) {
        std::vector<PointIndex> cands;
        in_span.for_each([&](int p) { cands.push_back(static_cast<PointIndex>(p)); });
        std::vector<int> parent(cands.size());
        std::iota(parent.begin(), parent.end(), 0);
        std::function<int(int)> find = [&](int x) {
            while (parent[static_cast<std::size_t>(x)] != x) {
                parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
                x = parent[static_cast<std::size_t>(x)];
            }
            return x;
        };
        std::unordered_map<PointIndex, int> pos;
        for (std::size_t i = 0; i < cands.size(); ++i) pos[cands[i]] = static_cast<int>(i);
        for (const Collineation& s : stabilizer_elements(cap)) {
            for (std::size_t i = 0; i < cands.size(); ++i) {
                PointIndex q = apply_point(g, s, cands[i]);
                auto it = pos.find(q);
                if (it == pos.end()) continue;  // cannot happen for true stabilizers
                int a = find(static_cast<int>(i)), b = find(it->second);
                if (a != b) parent[static_cast<std::size_t>(a)] = b;
            }
        }
        std::unordered_map<int, PointIndex> root_min;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            int r = find(static_cast<int>(i));
            auto it = root_min.find(r);
            if (it == root_min.end() || cands[i] < it->second) root_min[r] = cands[i];
        }
        for (auto& [r, p] : root_min) reps.push_back(p);
    }
    int off = off_span.find_first();
    if (off >= 0) reps.push_back(static_cast<PointIndex>(off));
    std::sort(reps.begin(), reps.end());
    return reps;
}

json mask_to_points_json(const PointMask& m) {
    json a = json::array();
    m.for_each([&](int p) { a.push_back(p); });
    return a;
}

PointMask mask_from_points_json(const json& a) {
    PointMask m;
    for (const auto& p : a) m.set(p.get<int>());
    return m;
}

struct ClassifyCheckpoint {
    std::vector<std::vector<PointMask>> levels;  // completed levels 0..k
    bool has_partial = false;
    int partial_level = 0;   // level being generated
    std::size_t parents_done = 0;
    std::vector<PointMask> collected;

    json to_json(std::uint64_t geometry_digest, int max_size) const {
        json jl = json::array();
        for (const auto& lvl : levels) {
            json jc = json::array();
            for (const auto& m : lvl) jc.push_back(mask_to_points_json(m));
            jl.push_back(jc);
        }
        json j{{"format", "qcaps-classify-checkpoint-v1"},
               {"geometry_digest", digest_hex(geometry_digest)},
               {"max_size", max_size},
               {"levels", jl}};
        if (has_partial) {
            json jc = json::array();
            for (const auto& m : collected) jc.push_back(mask_to_points_json(m));
            j["partial"] = json{{"level", partial_level},
                                {"parents_done", parents_done},
                                {"collected", jc}};
        } else {
            j["partial"] = nullptr;
        }
        return j;
    }

    static ClassifyCheckpoint from_json(const json& j, std::uint64_t geometry_digest, int max_size) {
        if (!j.is_object() || j.value("format", "") != "qcaps-classify-checkpoint-v1")
            throw DataError("classification checkpoint: unrecognized format");
        if (j.value("geometry_digest", "") != digest_hex(geometry_digest))
            throw DataError("classification checkpoint: geometry digest mismatch; fresh start required");
        if (j.value("max_size", -1) != max_size)
            throw DataError("classification checkpoint: max_size mismatch; fresh start required");
        ClassifyCheckpoint c;
        for (const auto& jl : j.at("levels")) {
            std::vector<PointMask> lvl;
            for (const auto& jc : jl) lvl.push_back(mask_from_points_json(jc));
            c.levels.push_back(std::move(lvl));
        }
        if (!j.at("partial").is_null()) {
            const json& p = j.at("partial");
            c.has_partial = true;
            c.partial_level = p.at("level").get<int>();
            c.parents_done = p.at("parents_done").get<std::size_t>();
            for (const auto& jc : p.at("collected")) c.collected.push_back(mask_from_points_json(jc));
        }
        return c;
    }
};

void atomic_write(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw DataError("cannot write: " + tmp);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

// Deduplicate one generated level into class representatives (least mask per
// class). Input order does not matter for the result.
std::vector<PointMask> dedup_level(const GeometryTables& g, std::vector<PointMask> cands) {
    std::sort(cands.begin(), cands.end(), mask_lex_less);
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

    struct Entry {
        InvariantSignature sig;
        Cap rep;
    };
    std::unordered_map<std::uint64_t, std::vector<Entry>> buckets;
    std::vector<PointMask> reps;
    for (const PointMask& m : cands) {
        Cap c = Cap::from_mask(g, m);
        InvariantSignature sig = signature(c);
        std::uint64_t h = sig.hash();
        auto& bucket = buckets[h];
        bool dup = false;
        for (Entry& e : bucket) {
            if (!(e.sig == sig)) continue;
            if (are_equivalent(c, e.rep)) {
                dup = true;
                break;
            }
        }
        if (!dup) {
            bucket.push_back(Entry{std::move(sig), c});
            reps.push_back(m);  // sorted input: first member is the least mask
        }
    }
    std::sort(reps.begin(), reps.end(), mask_lex_less);
    return reps;
}

}  // namespace

GenerationResult generate_cap_classes(const GeometryTables& g, const GenerationOptions& opt) {
    auto t0 = Clock::now();
    ClassifyCheckpoint ck;

    bool resumed = false;
    if (!opt.checkpoint_path.empty() && std::filesystem::exists(opt.checkpoint_path)) {
        std::ifstream in(opt.checkpoint_path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw DataError(std::string("classification checkpoint: corrupt (") + e.what() +
                            "); fresh start required");
        }
        ck = ClassifyCheckpoint::from_json(j, g.digest, opt.max_size);
        resumed = true;
    }
    if (!resumed) ck.levels.push_back({PointMask{}});  // level 0: the empty cap

    auto log = [&](const std::string& s) {
        if (opt.progress) opt.progress(s);
    };
    auto save = [&](bool partial, int level, std::size_t parents_done,
                    const std::vector<PointMask>& collected) {
        if (opt.checkpoint_path.empty()) return;
        ck.has_partial = partial;
        ck.partial_level = level;
        ck.parents_done = parents_done;
        ck.collected = collected;
        atomic_write(opt.checkpoint_path, ck.to_json(g.digest, opt.max_size).dump());
    };

    while (static_cast<int>(ck.levels.size()) <= opt.max_size) {
        const int next_size = static_cast<int>(ck.levels.size());
        const std::vector<PointMask>& parents = ck.levels.back();
        std::vector<PointMask> collected;
        std::size_t start_parent = 0;
        if (ck.has_partial) {
            if (ck.partial_level != next_size)
                throw DataError("classification checkpoint: inconsistent partial level");
            collected = ck.collected;
            start_parent = ck.parents_done;
            ck.has_partial = false;
        }

        std::unordered_set<std::uint64_t> seen;  // cheap duplicate-mask filter
        auto mask_key = [](const PointMask& m) {
            std::uint64_t h = kFnvOffset;
            for (auto w : m.w) h = fnv1a_u64(w, h);
            return h;
        };
        for (const PointMask& m : collected) seen.insert(mask_key(m));

        for (std::size_t pi = start_parent; pi < parents.size(); ++pi) {
            if (opt.budget_seconds > 0 && seconds_since(t0) > opt.budget_seconds) {
                save(true, next_size, pi, collected);
                log("generation: budget exhausted at size " + std::to_string(next_size) + ", parent " +
                    std::to_string(pi) + "/" + std::to_string(parents.size()));
                return GenerationResult{{}, false};
            }
            Cap parent = Cap::from_mask(g, parents[pi]);
            ExtensionState st = ExtensionState::build(parent);
            for (PointIndex p : candidate_orbit_reps(parent, st)) {
                PointMask child = parents[pi];
                child.set(p);
                if (seen.insert(mask_key(child)).second) collected.push_back(child);
            }
        }

        std::vector<PointMask> reps = dedup_level(g, std::move(collected));
        log("generation: size " + std::to_string(next_size) + ": " + std::to_string(reps.size()) +
            " classes");
        if (reps.empty()) break;  // no caps of this size or larger
        ck.levels.push_back(std::move(reps));
        save(false, 0, 0, {});
    }

    GenerationResult res;
    for (std::size_t s = 0; s < ck.levels.size(); ++s) {
        std::vector<CapClass> classes;
        for (const PointMask& m : ck.levels[s]) {
            CapClass c;
            c.representative = Cap::from_mask(g, m);
            c.count = 0;
            c.stabilizer_order = c.representative.size > 0 ? stabilizer_order(c.representative) : 0;
            c.complete = is_complete(c.representative);
            classes.push_back(std::move(c));
        }
        res.classes_by_size[static_cast<int>(s)] = std::move(classes);
    }
    return res;
}

namespace {

std::vector<SeedClass> seeds_from_generation(const GenerationResult& gen, std::span<const int> sizes) {
    if (!gen.completed)
        throw BudgetExhausted("classification incomplete: budget exhausted, checkpoint saved; rerun to resume");
    std::vector<SeedClass> seeds;
    for (int s : sizes) {
        auto it = gen.classes_by_size.find(s);
        if (it == gen.classes_by_size.end()) continue;
        int idx = 0;
        for (const CapClass& c : it->second) {
            SeedClass sc;
            sc.cap = c.representative;
            sc.complete = c.complete;
            sc.stabilizer_order = c.stabilizer_order;
            sc.class_id = "s" + std::to_string(s) + "-c" + std::to_string(idx++);
            seeds.push_back(std::move(sc));
        }
    }
    return seeds;
}

}  // namespace

std::vector<SeedClass> classify_seeds(const GeometryTables& g3, const GenerationOptions& opt) {
    if (g3.r != 3) throw std::invalid_argument("classify_seeds: needs PG(3,4)");
    GenerationOptions o = opt;
    o.max_size = 17;
    static const int sizes[] = {13, 15, 17};
    return seeds_from_generation(generate_cap_classes(g3, o), sizes);
}

std::vector<SeedClass> seed_classes_of_sizes(const GeometryTables& g, std::span<const int> sizes,
                                             const GenerationOptions& opt) {
    GenerationOptions o = opt;
    o.max_size = sizes.empty() ? 0 : *std::max_element(sizes.begin(), sizes.end());
    return seeds_from_generation(generate_cap_classes(g, o), sizes);
}

// ---------------------------------------------------------------------------
// Extension DFS.

const char* orbit_mode_name(OrbitMode m) {
    switch (m) {
        case OrbitMode::Off: return "off";
        case OrbitMode::Affine: return "affine";
        case OrbitMode::Stabilizer: return "stabilizer";
    }
    return "?";
}

std::vector<FirstLevelOrbit> first_level_orbits(const GeometryTables& ambient, const Cap& embedded_seed,
                                                const GeometryTables& seed_geo, const Cap& seed,
                                                OrbitMode mode) {
    if (seed.geo != &seed_geo) throw std::invalid_argument("first_level_orbits: seed geometry mismatch");
    ExtensionState st = ExtensionState::build(embedded_seed);
    PointMask avail = st.candidates & ambient.off_hyperplane_mask();
    std::vector<FirstLevelOrbit> orbits;
    if (avail.empty()) return orbits;

    switch (mode) {
        case OrbitMode::Off:
            avail.for_each([&](int p) { orbits.push_back({static_cast<PointIndex>(p), 1}); });
            break;
        case OrbitMode::Affine:
            // The pointwise stabilizer of the hyperplane is transitive on the
            // points off it, and fixes any seed inside the hyperplane, so the
            // whole first level is a single orbit.
            orbits.push_back({static_cast<PointIndex>(avail.find_first()),
                              static_cast<std::uint64_t>(avail.count())});
            break;
        case OrbitMode::Stabilizer: {
            // Lift each stabilizer element of the seed to the ambient space
            // (block extension fixing the last coordinate).
            std::vector<Collineation> lifted;
            if (seed.size > 0) {
                for (const Collineation& s : stabilizer_elements(seed)) {
                    Collineation L;
                    L.dim = ambient.r + 1;
                    L.frobenius = s.frobenius;
                    for (int i = 0; i < s.dim; ++i)
                        for (int j = 0; j < s.dim; ++j) L.m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = s.m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                    L.m[static_cast<std::size_t>(ambient.r)][static_cast<std::size_t>(ambient.r)] = GF_1;
                    lifted.push_back(L);
                }
            }
            std::vector<PointIndex> cands;
            avail.for_each([&](int p) { cands.push_back(static_cast<PointIndex>(p)); });
            std::vector<int> parent(cands.size());
            std::iota(parent.begin(), parent.end(), 0);
            std::function<int(int)> find = [&](int x) {
                while (parent[static_cast<std::size_t>(x)] != x) {
                    parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
                    x = parent[static_cast<std::size_t>(x)];
                }
                return x;
            };
            std::unordered_map<PointIndex, int> pos;
            for (std::size_t i = 0; i < cands.size(); ++i) pos[cands[i]] = static_cast<int>(i);
            for (const Collineation& s : lifted) {
                for (std::size_t i = 0; i < cands.size(); ++i) {
                    PointIndex q = apply_point(ambient, s, cands[i]);
                    auto it = pos.find(q);
                    if (it == pos.end()) continue;
                    int a = find(static_cast<int>(i)), b = find(it->second);
                    if (a != b) parent[static_cast<std::size_t>(a)] = b;
                }
            }
            std::map<int, std::pair<PointIndex, std::uint64_t>> comp;  // root -> (min, size)
            for (std::size_t i = 0; i < cands.size(); ++i) {
                int r = find(static_cast<int>(i));
                auto it = comp.find(r);
                if (it == comp.end())
                    comp[r] = {cands[i], 1};
                else {
                    it->second.first = std::min(it->second.first, cands[i]);
                    ++it->second.second;
                }
            }
            for (auto& [r, pr] : comp) orbits.push_back({pr.first, pr.second});
            std::sort(orbits.begin(), orbits.end(),
                      [](const FirstLevelOrbit& a, const FirstLevelOrbit& b) { return a.rep < b.rep; });
            break;
        }
    }
    return orbits;
}

namespace {

struct BranchStats {
    std::uint64_t nodes = 0;
    int max_depth = 0;
    std::uint64_t leaves = 0;
    bool truncated = false;
};

struct DfsDriver {
    const GeometryTables& g;
    int target;
    int seed_size;
    bool parity_prune;
    std::uint64_t max_nodes;
    bool checked;
    PointMask off_h;
    PointMask hyp_all;
    PointMask seed_members;
    const LeafSink* sink;
    BranchStats stats;

    void emit(const ExtensionState& st, const PointMask& acc) {
        ++stats.leaves;
        if (checked) {
            if (!st.matches_rebuild())
                throw std::logic_error("extension: incremental state diverged from rebuild");
            PointMask section = st.cap.members & g.distinguished_members();
            if (!(section == seed_members))
                throw std::logic_error("extension: section invariant violated");
        }
        if (sink) (*sink)(st.cap, acc);
    }

    // A hyperplane still needing an odd number of new points is only
    // satisfiable if some available candidate lies on it. acc bit H is the
    // current section parity of H.
    bool parity_feasible(const PointMask& acc, const PointMask& avail) const {
        PointMask need = (target & 1) ? hyp_all ^ acc : acc;  // bits needing odd additions
        PointMask covered;
        avail.for_each([&](int p) { covered |= g.point_hyps[static_cast<std::size_t>(p)]; });
        return need.andnot(covered).empty();
    }

    void dfs(const ExtensionState& st, const PointMask& acc, int last) {
        int depth = st.cap.size - seed_size;
        if (depth > stats.max_depth) stats.max_depth = depth;
        if (st.cap.size == target) {
            emit(st, acc);
            return;
        }
        PointMask avail = st.candidates & off_h & PointMask::above(last);
        if (st.cap.size + avail.count() < target) return;
        if (parity_prune && !parity_feasible(acc, avail)) return;
        for (int p = avail.find_first(); p >= 0; p = avail.find_next(p + 1)) {
            if (max_nodes != 0 && stats.nodes >= max_nodes) {
                stats.truncated = true;
                return;
            }
            ++stats.nodes;
            ExtensionState child = st;
            child.add_point(static_cast<PointIndex>(p));
            dfs(child, acc ^ g.point_hyps[static_cast<std::size_t>(p)], p);
            if (stats.truncated) return;
        }
    }
};

// Parity accumulator of a point set: bit H = |set ^ H| mod 2.
PointMask parity_acc_of(const GeometryTables& g, const PointMask& members) {
    PointMask acc;
    members.for_each([&](int p) { acc ^= g.point_hyps[static_cast<std::size_t>(p)]; });
    return acc;
}

// Run one (l1, l2) branch. st_l1 is the state after adding l1 (or the plain
// seed state when l1 < 0); chain_last is the DFS lower bound for further
// points. l2 < 0 means the branch is the whole unit (target within 1 of the
// current size).
BranchStats run_extension_branch(const GeometryTables& g, const ExtensionState& st_l1,
                                 const PointMask& acc_l1, int seed_size, int target, int l2,
                                 const ExtendOptions& opt, const PointMask& seed_members,
                                 const LeafSink& sink) {
    DfsDriver d{g,
                target,
                seed_size,
                opt.parity_prune,
                opt.max_nodes,
                opt.checked,
                g.off_hyperplane_mask(),
                PointMask::first_n(g.num_points),
                seed_members,
                &sink,
                {}};
    if (l2 < 0) {
        if (st_l1.cap.size == target) {
            d.stats.max_depth = st_l1.cap.size - seed_size;
            d.emit(st_l1, acc_l1);
        }
        return d.stats;
    }
    d.stats.nodes = 1;
    ExtensionState st = st_l1;
    st.add_point(static_cast<PointIndex>(l2));
    d.dfs(st, acc_l1 ^ g.point_hyps[static_cast<std::size_t>(l2)], l2);
    return d.stats;
}

// Second-level branch points for a unit.
std::vector<int> l2_branches(const GeometryTables& g, const ExtensionState& st_l1, int target,
                             int chain_last, int max_l2) {
    std::vector<int> out;
    if (st_l1.cap.size >= target - 1) {
        out.push_back(-1);
        return out;
    }
    PointMask avail = st_l1.candidates & g.off_hyperplane_mask() & PointMask::above(chain_last);
    avail.for_each([&](int p) { out.push_back(p); });
    if (max_l2 > 0 && static_cast<int>(out.size()) > max_l2) out.resize(static_cast<std::size_t>(max_l2));
    return out;
}

}  // namespace

ExtendStats extend_exhaustive(const GeometryTables& ambient, const GeometryTables& seed_geo,
                              const Cap& seed, int target, const ExtendOptions& opt,
                              const LeafSink& sink) {
    if (target < seed.size) throw std::invalid_argument("extend_exhaustive: target below seed size");
    if (!is_cap(seed)) throw std::invalid_argument("extend_exhaustive: seed is not a cap");
    Cap embedded = embed_cap(seed_geo, ambient, seed);
    ExtensionState st0 = ExtensionState::build(embedded);
    PointMask acc0 = parity_acc_of(ambient, embedded.members);

    ExtendStats out;
    if (target == seed.size) {
        BranchStats b = run_extension_branch(ambient, st0, acc0, seed.size, target, -1, opt,
                                             embedded.members, sink);
        out.nodes = b.nodes;
        out.max_depth = b.max_depth;
        out.leaves = b.leaves;
        out.truncated = b.truncated;
        return out;
    }

    for (const FirstLevelOrbit& orb : first_level_orbits(ambient, embedded, seed_geo, seed, opt.orbit_mode)) {
        if (opt.l1_only && *opt.l1_only != orb.rep) continue;
        ExtensionState st1 = st0;
        st1.add_point(orb.rep);
        out.nodes += 1;
        if (out.max_depth < 1) out.max_depth = 1;
        PointMask acc1 = acc0 ^ ambient.point_hyps[orb.rep];
        int chain_last = opt.orbit_mode == OrbitMode::Off ? orb.rep : -1;
        for (int l2 : l2_branches(ambient, st1, target, chain_last, opt.max_l2_branches)) {
            BranchStats b = run_extension_branch(ambient, st1, acc1, seed.size, target, l2, opt,
                                                 embedded.members, sink);
            out.nodes += b.nodes;
            out.max_depth = std::max(out.max_depth, b.max_depth);
            out.leaves += b.leaves;
            out.truncated = out.truncated || b.truncated;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Search driver with checkpointing.

namespace {

struct BranchKey {
    std::string class_id;
    int l1;
    int l2;
    bool operator<(const BranchKey& o) const {
        return std::tie(class_id, l1, l2) < std::tie(o.class_id, o.l1, o.l2);
    }
};

struct BranchRecord {
    std::uint64_t nodes = 0;
    int max_depth = 0;
    std::uint64_t leaves = 0;
    std::uint64_t parity_passed = 0;
    bool truncated = false;
    std::vector<std::vector<PointIndex>> quantum_caps;
};

json record_to_json(const BranchKey& k, const BranchRecord& r) {
    json found = json::array();
    for (const auto& pts : r.quantum_caps) {
        json a = json::array();
        for (PointIndex p : pts) a.push_back(p);
        found.push_back(a);
    }
    return json{{"seed", k.class_id},
                {"l1", k.l1},
                {"l2", k.l2},
                {"nodes", r.nodes},
                {"max_depth", r.max_depth},
                {"leaves", r.leaves},
                {"parity_passed", r.parity_passed},
                {"truncated", r.truncated},
                {"found", found}};
}

}  // namespace

std::string SearchConfig::semantic_string() const {
    std::string s = "r=" + std::to_string(ambient_r) + ";target=" + std::to_string(target) +
                    ";exploratory=" + std::to_string(exploratory) +
                    ";orbit=" + orbit_mode_name(orbit_mode) +
                    ";parity_prune=" + std::to_string(parity_prune) +
                    ";max_nodes=" + std::to_string(max_nodes_per_branch) +
                    ";l1=" + (l1_only ? std::to_string(*l1_only) : std::string("*")) +
                    ";max_l2=" + std::to_string(max_l2_branches) + ";seeds=";
    for (const auto& f : seed_filter) s += f + ",";
    return s;
}

std::string SearchReport::to_json(bool include_wall) const {
    json jseeds = json::array();
    for (const SeedReport& sr : seeds) {
        json jorbits = json::array();
        for (const OrbitReport& orb : sr.orbits) {
            jorbits.push_back(json{{"rep", orb.rep},
                                   {"orbit_size", orb.orbit_size},
                                   {"nodes", orb.nodes},
                                   {"max_depth", orb.max_depth},
                                   {"caps_found", orb.caps_found},
                                   {"parity_passed", orb.parity_passed},
                                   {"quantum_found", orb.quantum_found},
                                   {"truncated", orb.truncated}});
        }
        json js{{"class_id", sr.class_id},
                {"seed_size", sr.seed_size},
                {"orbits", jorbits},
                {"nodes", sr.nodes},
                {"max_depth", sr.max_depth},
                {"caps_found", sr.caps_found},
                {"parity_passed", sr.parity_passed},
                {"quantum_found", sr.quantum_found},
                {"expansion_exact", sr.expansion_exact}};
        if (sr.expanded_caps)
            js["expanded_caps"] = *sr.expanded_caps;
        else
            js["expanded_caps"] = nullptr;
        jseeds.push_back(std::move(js));
    }
    json jfound = json::array();
    for (const FoundCap& f : found) {
        json pts = json::array();
        for (PointIndex p : f.points) pts.push_back(p);
        jfound.push_back(json{{"class_id", f.class_id},
                              {"l1", f.l1},
                              {"l2", f.l2},
                              {"points", pts},
                              {"profile", profile_to_json(f.profile)}});
    }
    json j{{"format", "qcaps-report-v1"},
           {"config_digest", config_digest},
           {"geometry_digest", geometry_digest},
           {"target", target},
           {"orbit_mode", orbit_mode},
           {"seeds", jseeds},
           {"found", jfound},
           {"totals", json{{"nodes", total_nodes},
                           {"caps_found", total_caps},
                           {"parity_passed", total_parity_passed},
                           {"quantum_caps_found", quantum_caps_found}}},
           {"truncated", truncated}};
    if (include_wall) {
        j["wall_seconds"] = wall_seconds;
        j["report_digest"] = digest();
    }
    return j.dump();
}

std::string SearchReport::digest() const {
    return digest_hex(fnv1a(to_json(false)));
}

SearchReport run_search(const GeometryTables& ambient, const GeometryTables& seed_geo,
                        std::span<const SeedClass> seeds, const SearchConfig& cfg) {
    auto t0 = Clock::now();
    if (ambient.r != seed_geo.r + 1)
        throw std::invalid_argument("run_search: seed geometry must be the hyperplane geometry");

    // filter seeds
    std::vector<const SeedClass*> active;
    for (const SeedClass& s : seeds) {
        if (!cfg.seed_filter.empty() &&
            std::find(cfg.seed_filter.begin(), cfg.seed_filter.end(), s.class_id) == cfg.seed_filter.end())
            continue;
        if (s.cap.size > cfg.target)
            throw std::invalid_argument("run_search: seed " + s.class_id + " larger than target");
        if (!is_cap(s.cap)) throw std::invalid_argument("run_search: seed " + s.class_id + " is not a cap");
        active.push_back(&s);
    }

    // semantic config digest folds in the seed identities
    std::uint64_t cd = fnv1a(cfg.semantic_string());
    cd = fnv1a_u64(ambient.digest, cd);
    cd = fnv1a_u64(seed_geo.digest, cd);
    for (const SeedClass* s : active) {
        cd = fnv1a(s->class_id, cd);
        for (auto w : s->cap.members.w) cd = fnv1a_u64(w, cd);
    }
    const std::string config_digest = digest_hex(cd);

    // checkpoint state
    std::map<BranchKey, BranchRecord> records;
    std::mutex mu;
    auto last_flush = Clock::now();

    auto records_json = [&]() {
        json arr = json::array();
        for (const auto& [k, r] : records) arr.push_back(record_to_json(k, r));
        return json{{"format", "qcaps-search-checkpoint-v1"},
                    {"config_digest", config_digest},
                    {"geometry_digest", digest_hex(ambient.digest)},
                    {"records", arr}}
            .dump();
    };
    auto flush_checkpoint = [&](bool force) {
        if (cfg.checkpoint_path.empty()) return;
        if (!force && seconds_since(last_flush) < cfg.checkpoint_interval_s) return;
        atomic_write(cfg.checkpoint_path, records_json());
        last_flush = Clock::now();
    };

    if (cfg.resume) {
        std::ifstream in(cfg.checkpoint_path);
        if (!in) throw DataError("resume: cannot open checkpoint " + cfg.checkpoint_path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw DataError(std::string("resume: corrupt checkpoint (") + e.what() +
                            "); fresh start required");
        }
        if (j.value("format", "") != "qcaps-search-checkpoint-v1")
            throw DataError("resume: unrecognized checkpoint format");
        if (j.value("config_digest", "") != config_digest)
            throw DataError("resume: config digest mismatch; fresh start required");
        if (j.value("geometry_digest", "") != digest_hex(ambient.digest))
            throw DataError("resume: geometry digest mismatch; fresh start required");
        for (const auto& jr : j.at("records")) {
            BranchKey k{jr.at("seed").get<std::string>(), jr.at("l1").get<int>(), jr.at("l2").get<int>()};
            BranchRecord r;
            r.nodes = jr.at("nodes").get<std::uint64_t>();
            r.max_depth = jr.at("max_depth").get<int>();
            r.leaves = jr.at("leaves").get<std::uint64_t>();
            r.parity_passed = jr.at("parity_passed").get<std::uint64_t>();
            r.truncated = jr.at("truncated").get<bool>();
            for (const auto& jf : jr.at("found")) {
                std::vector<PointIndex> pts;
                for (const auto& p : jf) pts.push_back(p.get<PointIndex>());
                r.quantum_caps.push_back(std::move(pts));
            }
            records.emplace(std::move(k), std::move(r));
        }
    } else if (!cfg.checkpoint_path.empty() && std::filesystem::exists(cfg.checkpoint_path)) {
        throw DataError("checkpoint file exists: " + cfg.checkpoint_path +
                        " (resume it or remove it first)");
    }

    // units
    struct Unit {
        const SeedClass* seed;
        Cap embedded;
        FirstLevelOrbit orbit;
        int orbit_index;
        int m;  // extension length
    };
    std::vector<Unit> units;
    struct SeedInfo {
        const SeedClass* seed;
        std::vector<FirstLevelOrbit> orbits;
        int m;
    };
    std::vector<SeedInfo> seed_infos;
    for (const SeedClass* s : active) {
        Cap embedded = embed_cap(seed_geo, ambient, s->cap);
        int m = cfg.target - s->cap.size;
        SeedInfo info{s, {}, m};
        if (m == 0) {
            info.orbits.push_back(FirstLevelOrbit{0, 1});  // pseudo-orbit, l1 = -1
            units.push_back(Unit{s, embedded, FirstLevelOrbit{0, 1}, 0, 0});
        } else {
            auto orbs = first_level_orbits(ambient, embedded, seed_geo, s->cap, cfg.orbit_mode);
            int oi = 0;
            for (const auto& orb : orbs) {
                if (cfg.l1_only && *cfg.l1_only != orb.rep) {
                    ++oi;
                    continue;
                }
                info.orbits.push_back(orb);
                units.push_back(Unit{s, embedded, orb, oi, m});
                ++oi;
            }
        }
        seed_infos.push_back(std::move(info));
    }

    ExtendOptions ext;
    ext.orbit_mode = cfg.orbit_mode;
    ext.parity_prune = cfg.parity_prune;
    ext.max_nodes = cfg.max_nodes_per_branch;
    ext.checked = cfg.checked;

    const PointMask hyp_all = PointMask::first_n(ambient.num_points);
    const bool odd_target = (cfg.target & 1) != 0;

    auto run_unit = [&](const Unit& u) {
        ExtensionState st0 = ExtensionState::build(u.embedded);
        PointMask acc0 = parity_acc_of(ambient, u.embedded.members);
        int l1 = u.m == 0 ? -1 : static_cast<int>(u.orbit.rep);
        ExtensionState st1 = st0;
        PointMask acc1 = acc0;
        if (l1 >= 0) {
            st1.add_point(u.orbit.rep);
            acc1 = acc0 ^ ambient.point_hyps[u.orbit.rep];
        }
        int chain_last = cfg.orbit_mode == OrbitMode::Off ? l1 : -1;
        std::vector<int> branches = l2_branches(ambient, st1, cfg.target, chain_last, cfg.max_l2_branches);

        std::uint64_t unit_nodes = l1 >= 0 ? 1 : 0;
        std::uint64_t unit_found = 0;
        for (int l2 : branches) {
            BranchKey key{u.seed->class_id, l1, l2};
            {
                std::lock_guard<std::mutex> lk(mu);
                if (records.count(key)) continue;
            }
            BranchRecord rec;
            LeafSink sink = [&](const Cap& cap, const PointMask& acc) {
                bool parity_ok = odd_target ? acc == hyp_all : acc.empty();
                if (cfg.checked) {
                    CodeProfile prof = quantum_check(cap);  // throws on predicate disagreement
                    if (prof.parity != parity_ok)
                        throw std::logic_error("parity accumulator disagrees with quantum_check");
                }
                if (!parity_ok) return;
                ++rec.parity_passed;
                CodeProfile prof = quantum_check(cap);
                if (!prof.is_quantum()) return;
                if (cfg.checked && cfg.exploratory) {
                    // the seed-size derivation is sound only if the largest
                    // section of every quantum cap clears the lower bound
                    int max_section = 0;
                    for (int h = 0; h < ambient.num_points; ++h)
                        max_section = std::max(max_section,
                                               cap.members.intersection_count(ambient.hyp_members[h]));
                    auto sizes = admissible_seed_sizes(cfg.target, true, cfg.ambient_r);
                    if (!sizes.empty() && max_section < sizes.front())
                        throw std::logic_error("found quantum cap with max section below the seed bound");
                }
                rec.quantum_caps.push_back(cap.point_list());
            };
            BranchStats b = run_extension_branch(ambient, st1, acc1, u.embedded.size, cfg.target, l2,
                                                 ext, u.embedded.members, sink);
            rec.nodes = b.nodes;
            rec.max_depth = b.max_depth;
            rec.leaves = b.leaves;
            rec.truncated = b.truncated;
            {
                std::lock_guard<std::mutex> lk(mu);
                unit_nodes += rec.nodes;
                unit_found += rec.quantum_caps.size();
                records.emplace(std::move(key), std::move(rec));
                flush_checkpoint(false);
            }
        }
        {
            std::lock_guard<std::mutex> lk(mu);
            std::cerr << "progress class=" << u.seed->class_id << " orbit=" << u.orbit_index
                      << " nodes=" << unit_nodes << " found=" << unit_found << "\n";
        }
    };

    int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(units.size())));
    if (workers <= 1) {
        for (const Unit& u : units) run_unit(u);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int i = 0; i < workers; ++i) {
            pool.emplace_back([&]() {
                while (true) {
                    std::size_t idx = next.fetch_add(1);
                    if (idx >= units.size()) return;
                    run_unit(units[idx]);
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    flush_checkpoint(true);

    // build report from records
    SearchReport rep;
    rep.config_digest = config_digest;
    rep.geometry_digest = digest_hex(ambient.digest);
    rep.target = cfg.target;
    rep.orbit_mode = orbit_mode_name(cfg.orbit_mode);

    for (const SeedInfo& info : seed_infos) {
        SeedReport sr;
        sr.class_id = info.seed->class_id;
        sr.seed_size = info.seed->cap.size;
        std::uint64_t weighted_leaves = 0;
        for (const FirstLevelOrbit& orb : info.orbits) {
            int l1 = info.m == 0 ? -1 : static_cast<int>(orb.rep);
            OrbitReport orp;
            orp.rep = info.m == 0 ? 0 : orb.rep;
            orp.orbit_size = orb.orbit_size;
            orp.nodes = info.m == 0 ? 0 : 1;
            for (auto it = records.lower_bound(BranchKey{sr.class_id, l1, -1});
                 it != records.end() && it->first.class_id == sr.class_id && it->first.l1 == l1; ++it) {
                const BranchRecord& r = it->second;
                orp.nodes += r.nodes;
                orp.max_depth = std::max(orp.max_depth, r.max_depth);
                orp.caps_found += r.leaves;
                orp.parity_passed += r.parity_passed;
                orp.quantum_found += r.quantum_caps.size();
                orp.truncated = orp.truncated || r.truncated;
                for (const auto& pts : r.quantum_caps) {
                    FoundCap f;
                    f.class_id = sr.class_id;
                    f.l1 = l1;
                    f.l2 = it->first.l2;
                    f.points = pts;
                    Cap cap = Cap::from_points(ambient, pts);
                    f.profile = quantum_check(cap);
                    rep.found.push_back(std::move(f));
                }
            }
            if (info.m >= 1 && orp.max_depth < 1) orp.max_depth = 1;
            weighted_leaves += orp.caps_found * orp.orbit_size;
            sr.nodes += orp.nodes;
            sr.max_depth = std::max(sr.max_depth, orp.max_depth);
            sr.caps_found += orp.caps_found;
            sr.parity_passed += orp.parity_passed;
            sr.quantum_found += orp.quantum_found;
            sr.orbits.push_back(orp);
        }
        if (info.m > 0) {
            sr.expanded_caps = weighted_leaves / static_cast<std::uint64_t>(info.m);
            sr.expansion_exact = weighted_leaves % static_cast<std::uint64_t>(info.m) == 0;
        } else {
            sr.expanded_caps = sr.caps_found;
            sr.expansion_exact = true;
        }
        if (cfg.orbit_mode == OrbitMode::Off) {
            sr.expanded_caps = sr.caps_found;
            sr.expansion_exact = true;
        }
        rep.total_nodes += sr.nodes;
        rep.total_caps += sr.caps_found;
        rep.total_parity_passed += sr.parity_passed;
        rep.quantum_caps_found += sr.quantum_found;
        rep.truncated = rep.truncated || std::any_of(sr.orbits.begin(), sr.orbits.end(),
                                                     [](const OrbitReport& o) { return o.truncated; });
        rep.seeds.push_back(std::move(sr));
    }
    rep.wall_seconds = seconds_since(t0);
    return rep;
}

// ---------------------------------------------------------------------------
// Seed cache.

void write_seed_cache(const std::string& path, const GeometryTables& g,
                      std::span<const SeedClass> seeds, std::span<const int> sizes) {
    json header{{"format", "qcaps-seeds-v1"},
                {"dim", g.r},
                {"geometry_digest", digest_hex(g.digest)},
                {"sizes", std::vector<int>(sizes.begin(), sizes.end())}};
    std::string body = header.dump() + "\n";
    for (const SeedClass& s : seeds) {
        json j = cap_to_json(s.cap);
        j["class_id"] = s.class_id;
        j["complete"] = s.complete;
        j["stabilizer_order"] = s.stabilizer_order;
        body += j.dump() + "\n";
    }
    atomic_write(path, body);
}

std::vector<SeedClass> read_seed_cache(const std::string& path, const GeometryTables& g,
                                       std::span<const int> needed_sizes, bool checked) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open seed cache: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("seed cache empty: " + path);
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(std::string("seed cache header: bad JSON: ") + e.what());
    }
    if (header.value("format", "") != "qcaps-seeds-v1") throw DataError("seed cache: unrecognized format");
    if (header.value("dim", -1) != g.r) throw DataError("seed cache: wrong dimension");
    if (header.value("geometry_digest", "") != digest_hex(g.digest))
        throw DataError("seed cache: geometry digest mismatch; regenerate");
    std::vector<int> have = header.at("sizes").get<std::vector<int>>();
    for (int s : needed_sizes)
        if (std::find(have.begin(), have.end(), s) == have.end())
            throw DataError("seed cache lacks size " + std::to_string(s) + "; regenerate");

    GeometryCache cache;
    std::vector<SeedClass> seeds;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("seed cache line " + std::to_string(line_no) + ": bad JSON: " + e.what());
        }
        SeedClass s;
        s.cap = cap_from_json(j, cache);  // validates normalization, order, cap property
        if (s.cap.geo->r != g.r) throw DataError("seed cache line " + std::to_string(line_no) + ": wrong dim");
        s.cap.geo = &g;
        s.class_id = j.at("class_id").get<std::string>();
        s.complete = j.at("complete").get<bool>();
        s.stabilizer_order = j.at("stabilizer_order").get<std::uint64_t>();
        if (is_complete(s.cap) != s.complete)
            throw DataError("seed cache line " + std::to_string(line_no) + ": completeness flag wrong");
        seeds.push_back(std::move(s));
    }
    if (checked) {
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            if (stabilizer_order(seeds[i].cap) != seeds[i].stabilizer_order)
                throw DataError("seed cache: stabilizer order mismatch for " + seeds[i].class_id);
            for (std::size_t j2 = i + 1; j2 < seeds.size(); ++j2) {
                if (seeds[i].cap.size != seeds[j2].cap.size) continue;
                if (are_equivalent(seeds[i].cap, seeds[j2].cap))
                    throw DataError("seed cache: " + seeds[i].class_id + " and " + seeds[j2].class_id +
                                    " are equivalent");
            }
        }
    }
    return seeds;
}

}  // namespace qcaps
