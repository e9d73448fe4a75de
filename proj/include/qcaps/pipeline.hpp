#pragma once

// The search pipeline: admissible seed sizes, isomorph-free generation of cap
// classes in the seed geometry, exhaustive extension of embedded seeds by
// points off the distinguished hyperplane, and the deterministic,
// checkpointable search driver that filters extensions by the quantum
// predicate.
//
// Determinism contract: a run is fully described by its semantic config
// digest plus the geometry digest; two runs with equal digests produce
// byte-identical reports (wall time excluded). Worker count and file paths
// do not affect results and are excluded from the digest.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "qcaps/codes.hpp"
#include "qcaps/equivalence.hpp"

namespace qcaps {

// Known nonexistence bounds for [n,5] codes over GF(4): no such code has
// d > n - bound, hence some hyperplane contains at least `bound` points of
// any spanning n-set. Imported from the online code tables (codetables.de),
// not computed here.
struct SectionBoundFact {
    int n;
    int bound;
    const char* source;
};
std::span<const SectionBoundFact> known_section_bounds();

// Largest cap size in PG(dim,4), for the seed-size upper bound.
int max_cap_size(int dim);

// Admissible hyperplane-section sizes for a target-size search in PG(r,4).
// Strict mode only accepts targets with a known section bound; exploratory
// mode derives the lower bound when no table entry exists. Sizes share the
// parity of the target.
std::vector<int> admissible_seed_sizes(int target, bool exploratory, int ambient_r = 4);

// ---------------------------------------------------------------------------
// Isomorph-free generation of cap classes by canonical augmentation:
// extend each class representative by one candidate per stabilizer orbit,
// then deduplicate the new level with the equivalence machinery.

struct GenerationOptions {
    int max_size = 17;
    std::string checkpoint_path;  // empty: no checkpointing
    double budget_seconds = 0;    // 0: unlimited; soft, checked between parents
    std::function<void(const std::string&)> progress;  // optional log sink
};

struct GenerationResult {
    std::map<int, std::vector<CapClass>> classes_by_size;
    bool completed = true;  // false: budget hit, checkpoint holds the partial level
};

// A soft resource budget ran out; the checkpoint holds a resumable state.
struct BudgetExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

GenerationResult generate_cap_classes(const GeometryTables& g, const GenerationOptions& opt);

struct SeedClass {
    Cap cap;  // in the seed geometry
    bool complete = false;
    std::string class_id;  // "s<size>-c<index>", deterministic
    std::uint64_t stabilizer_order = 0;
};

// Seed classes of sizes 13, 15, 17 in PG(3,4).
std::vector<SeedClass> classify_seeds(const GeometryTables& g3, const GenerationOptions& opt);

// Seed classes of the given sizes (exploratory targets).
std::vector<SeedClass> seed_classes_of_sizes(const GeometryTables& g, std::span<const int> sizes,
                                             const GenerationOptions& opt);

// The 17-point elliptic quadric of PG(3,4): zero set of
// x0*x1 + x2^2 + x2*x3 + w*x3^2. Used as a built-in seed for smoke runs.
Cap ovoid_cap(const GeometryTables& g3);

// ---------------------------------------------------------------------------
// Exhaustive extension of an embedded seed by points off the distinguished
// hyperplane, emitting exactly the caps K of the target size with
// K ^ H = seed. DFS in ascending point order ("next point > last added");
// branches die when the remaining candidate count cannot reach the target.

enum class OrbitMode {
    Off,        // plain sorted-subset DFS, every cap emitted exactly once
    Affine,     // first level reduced to one representative: the subgroup
                // fixing the hyperplane pointwise is transitive off it
    Stabilizer  // first level reduced to orbits of the lifted seed stabilizer
};

const char* orbit_mode_name(OrbitMode m);

struct ExtendOptions {
    OrbitMode orbit_mode = OrbitMode::Off;
    bool parity_prune = false;  // experimental: prunes branches that cannot
                                // reach full hyperplane parity; shrinks the
                                // cap stream, never the quantum findings
    std::uint64_t max_nodes = 0;  // 0: unlimited; else stop after this many
                                  // extension steps (deterministic prefix)
    bool checked = false;         // re-verify incremental state and section
                                  // invariant on every emission
    std::optional<PointIndex> l1_only;  // restrict to one first-level branch
    int max_l2_branches = 0;            // 0: all; else first k second-level branches
};

struct FirstLevelOrbit {
    PointIndex rep;
    std::uint64_t orbit_size;
};

// First-level branches for a given embedded seed and orbit mode.
std::vector<FirstLevelOrbit> first_level_orbits(const GeometryTables& ambient, const Cap& embedded_seed,
                                                const GeometryTables& seed_geo, const Cap& seed,
                                                OrbitMode mode);

struct ExtendStats {
    std::uint64_t nodes = 0;  // add_point steps performed
    int max_depth = 0;        // deepest extension level reached
    std::uint64_t leaves = 0; // caps emitted at the target size
    bool truncated = false;   // max_nodes hit
};

// sink(cap, parity_acc): parity_acc bit H = |cap ^ H| mod 2.
using LeafSink = std::function<void(const Cap&, const PointMask&)>;

ExtendStats extend_exhaustive(const GeometryTables& ambient, const GeometryTables& seed_geo,
                              const Cap& seed, int target, const ExtendOptions& opt,
                              const LeafSink& sink);

// ---------------------------------------------------------------------------
// Search driver.

struct SearchConfig {
    int ambient_r = 4;
    int target = 37;
    bool exploratory = false;
    std::vector<std::string> seed_filter;  // class ids; empty = all seeds
    OrbitMode orbit_mode = OrbitMode::Affine;
    bool parity_prune = false;
    bool checked = false;
    std::uint64_t max_nodes_per_branch = 0;  // bounded smoke runs
    std::optional<PointIndex> l1_only;
    int max_l2_branches = 0;
    int workers = 1;                  // not part of the semantic digest
    std::string checkpoint_path;      // empty: no checkpointing
    bool resume = false;
    double checkpoint_interval_s = 30.0;

    // Digest of everything that affects results (seed identities folded in
    // by run_search).
    std::string semantic_string() const;
};

struct OrbitReport {
    PointIndex rep = 0;
    std::uint64_t orbit_size = 1;
    std::uint64_t nodes = 0;
    int max_depth = 0;
    std::uint64_t caps_found = 0;     // leaves at target size
    std::uint64_t parity_passed = 0;
    std::uint64_t quantum_found = 0;
    bool truncated = false;
};

struct FoundCap {
    std::string class_id;
    int l1 = -1;
    int l2 = -1;
    std::vector<PointIndex> points;  // in the ambient geometry
    CodeProfile profile;
};

struct SeedReport {
    std::string class_id;
    int seed_size = 0;
    std::vector<OrbitReport> orbits;
    std::uint64_t nodes = 0;
    int max_depth = 0;
    std::uint64_t caps_found = 0;
    std::uint64_t parity_passed = 0;
    std::uint64_t quantum_found = 0;
    // Orbit-expanded leaf count: sum over orbits of caps_found * orbit_size
    // divided by the extension length; equals the unreduced count when the
    // division is exact (recorded separately). Only set when m > 0.
    std::optional<std::uint64_t> expanded_caps = 0;
    bool expansion_exact = true;
};

struct SearchReport {
    std::string config_digest;
    std::string geometry_digest;
    int target = 0;
    std::string orbit_mode;
    std::vector<SeedReport> seeds;
    std::vector<FoundCap> found;
    std::uint64_t total_nodes = 0;
    std::uint64_t total_caps = 0;
    std::uint64_t total_parity_passed = 0;
    std::uint64_t quantum_caps_found = 0;
    bool truncated = false;
    double wall_seconds = 0;  // excluded from the report digest

    std::string to_json(bool include_wall = true) const;
    std::string digest() const;  // over to_json(false)
};

SearchReport run_search(const GeometryTables& ambient, const GeometryTables& seed_geo,
                        std::span<const SeedClass> seeds, const SearchConfig& cfg);

// Seed cache: a cap file with class metadata plus a header line carrying the
// geometry digest and the list of generated sizes.
void write_seed_cache(const std::string& path, const GeometryTables& g,
                      std::span<const SeedClass> seeds, std::span<const int> sizes);

// Loads and verifies a seed cache: geometry digest, cap validity and metadata
// always; pairwise inequivalence and stabilizer orders when `checked`.
// Throws if the cache does not cover all `needed_sizes`.
std::vector<SeedClass> read_seed_cache(const std::string& path, const GeometryTables& g,
                                       std::span<const int> needed_sizes, bool checked);

}  // namespace qcaps
