// qcaps: caps in PG(r,4), quantum stabilizer conditions, classification and
// exhaustive extension searches.
//
// Machine output (JSON) goes to stdout, progress to stderr. Exit codes:
//   0  success (search: completed, nothing found)
//   1  usage error
//   2  data error (bad files, bad caps, checkpoint mismatches)
//   3  internal cross-check failure
//   4  search completed with findings

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qcaps/capfile.hpp"
#include "qcaps/digest.hpp"
#include "qcaps/pipeline.hpp"

using namespace qcaps;
using nlohmann::json;

namespace {

int cmd_tables(int dim, const std::string& dump, const std::string& format) {
    GeometryTables g = GeometryTables::build(dim);
    if (dump == "points" || dump == "hyperplanes") {
        const auto& vecs = dump == "points" ? g.points : g.hyperplanes;
        for (std::size_t i = 0; i < vecs.size(); ++i)
            std::cout << i << " " << vec_to_string(vecs[i]) << "\n";
        return 0;
    }
    int hyp_size = g.hyp_members[0].count();
    if (format == "json") {
        json j{{"dim", g.r},
               {"points", g.num_points},
               {"hyperplanes", g.num_points},
               {"line_size", 5},
               {"hyperplane_size", hyp_size},
               {"geometry_digest", digest_hex(g.digest)}};
        std::cout << j.dump() << "\n";
    } else {
        std::cout << "PG(" << g.r << ",4): " << g.num_points << " points, " << g.num_points
                  << " hyperplanes of size " << hyp_size << ", lines of size 5, digest "
                  << digest_hex(g.digest) << "\n";
    }
    return 0;
}

int cmd_verify(const std::string& path, bool checked, bool matrix) {
    GeometryCache cache;
    auto entries = read_cap_file(path, cache);
    bool any_bad = false;
    for (const auto& e : entries) {
        json out{{"line", e.line_no}};
        if (!e.cap) {
            any_bad = true;
            out["cap"] = false;
            out["error"] = e.error;
        } else {
            out["cap"] = true;
            out["complete"] = is_complete(*e.cap);
            CodeProfile p = quantum_check(*e.cap);
            out["profile"] = profile_to_json(p);
            if (matrix) out["matrix"] = generator_to_json(generator_from_cap(*e.cap));
            if (checked) {
                GeneratorMatrix gm = generator_from_cap(*e.cap);
                if (all_weights_even(gm) != p.even)
                    throw CrossCheckError("verify: weight recomputation disagrees");
            }
        }
        std::cout << out.dump() << "\n";
    }
    return any_bad ? 2 : 0;
}

Cap first_cap_of(const std::string& path, GeometryCache& cache) {
    auto entries = read_cap_file(path, cache);
    for (const auto& e : entries) {
        if (!e.cap) throw DataError(path + ":" + std::to_string(e.line_no) + ": " + e.error);
        return *e.cap;
    }
    throw DataError(path + ": no cap lines");
}

int cmd_equiv(const std::string& patha, const std::string& pathb) {
    GeometryCache cache;
    Cap a = first_cap_of(patha, cache);
    Cap b = first_cap_of(pathb, cache);
    json out;
    if (a.geo->r != b.geo->r || a.size != b.size) {
        out = json{{"equivalent", false},
                   {"reason", a.geo->r != b.geo->r ? "dimension mismatch" : "size mismatch"}};
        std::cout << out.dump() << "\n";
        return 0;
    }
    bool sig_equal = signature(a) == signature(b);
    auto w = are_equivalent(a, b);
    out["equivalent"] = w.has_value();
    out["signature_equal"] = sig_equal;
    if (w) {
        out["witness"] = collineation_to_json(*w);
        if (!(apply(*w, a).members == b.members))
            throw CrossCheckError("equiv: witness fails verification");
    }
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_classify_file(const std::string& path) {
    GeometryCache cache;
    auto entries = read_cap_file(path, cache);
    std::vector<Cap> caps;
    for (const auto& e : entries) {
        if (!e.cap) throw DataError(path + ":" + std::to_string(e.line_no) + ": " + e.error);
        caps.push_back(*e.cap);
    }
    if (caps.empty()) {
        std::cout << json{{"size", 0}, {"classes", json::array()}}.dump() << "\n";
        return 0;
    }
    for (const Cap& c : caps)
        if (c.geo != caps.front().geo || c.size != caps.front().size)
            throw DataError("classify: caps must share dimension and size");
    auto classes = classify(caps);
    std::cout << class_report_to_json(caps.front().size, classes).dump() << "\n";
    return 0;
}

GenerationOptions gen_options(const std::string& checkpoint, double budget) {
    GenerationOptions opt;
    opt.checkpoint_path = checkpoint;
    opt.budget_seconds = budget;
    opt.progress = [](const std::string& s) { std::cerr << s << "\n"; };
    return opt;
}

int cmd_classify_seeds(const std::string& cache_out, const std::string& checkpoint, double budget,
                       std::vector<int> sizes) {
    GeometryTables g3 = GeometryTables::build(3);
    if (sizes.empty()) sizes = {13, 15, 17};
    std::vector<SeedClass> seeds;
    try {
        seeds = seed_classes_of_sizes(g3, sizes, gen_options(checkpoint, budget));
    } catch (const BudgetExhausted& e) {
        std::cerr << e.what() << "\n";
        std::cout << json{{"status", "checkpointed"}}.dump() << "\n";
        return 0;
    }
    if (!cache_out.empty()) write_seed_cache(cache_out, g3, seeds, sizes);

    json reports = json::array();
    for (int s : sizes) {
        json arr = json::array();
        for (const SeedClass& sc : seeds) {
            if (sc.cap.size != s) continue;
            json j = cap_to_json(sc.cap);
            arr.push_back(json{{"class_id", sc.class_id},
                               {"representative", j},
                               {"stabilizer_order", sc.stabilizer_order},
                               {"complete", sc.complete}});
        }
        reports.push_back(json{{"size", s}, {"classes", arr}});
    }
    std::cout << json{{"reports", reports}}.dump() << "\n";
    return 0;
}

OrbitMode parse_orbit_mode(const std::string& s) {
    if (s == "off") return OrbitMode::Off;
    if (s == "affine") return OrbitMode::Affine;
    if (s == "stabilizer") return OrbitMode::Stabilizer;
    throw CLI::ValidationError("--orbit-mode", "must be off, affine or stabilizer");
}

struct SearchArgs {
    int dim = 4;
    int target = 37;
    bool exploratory = false;
    std::string seeds_spec;  // "builtin:ovoid17" or comma list of class ids
    std::string seed_cache;
    std::string checkpoint;
    bool resume = false;
    bool checked = false;
    std::string orbit_mode = "affine";
    bool parity_prune = false;
    std::uint64_t max_nodes = 0;
    int l1 = -1;
    int max_l2 = 0;
    int workers = 1;
    std::string out_caps;
    double gen_budget = 0;
    std::string gen_checkpoint;
    std::string format = "json";
};

int cmd_search(const SearchArgs& a) {
    GeometryTables ambient = GeometryTables::build(a.dim);
    GeometryTables seed_geo = GeometryTables::build(a.dim - 1);

    std::vector<int> sizes = admissible_seed_sizes(a.target, a.exploratory, a.dim);
    std::vector<SeedClass> seeds;
    if (a.seeds_spec == "builtin:ovoid17") {
        if (a.dim != 4 || a.target < 17) throw DataError("builtin:ovoid17 needs --dim 4 and target >= 17");
        SeedClass sc;
        sc.cap = ovoid_cap(seed_geo);
        sc.complete = true;
        sc.class_id = "ovoid17";
        sc.stabilizer_order = stabilizer_order(sc.cap);
        seeds.push_back(std::move(sc));
    } else if (!a.seed_cache.empty() && std::filesystem::exists(a.seed_cache)) {
        seeds = read_seed_cache(a.seed_cache, seed_geo, sizes, a.checked);
        std::cerr << "loaded " << seeds.size() << " seed classes from " << a.seed_cache << "\n";
    } else {
        try {
            seeds = seed_classes_of_sizes(seed_geo, sizes, gen_options(a.gen_checkpoint, a.gen_budget));
        } catch (const BudgetExhausted& e) {
            std::cerr << e.what() << "\n";
            std::cout << json{{"status", "checkpointed"}}.dump() << "\n";
            return 0;
        }
        if (!a.seed_cache.empty()) {
            write_seed_cache(a.seed_cache, seed_geo, seeds, sizes);
            std::cerr << "wrote seed cache " << a.seed_cache << "\n";
        }
    }
    // keep only admissible sizes
    std::erase_if(seeds, [&](const SeedClass& s) {
        return std::find(sizes.begin(), sizes.end(), s.cap.size) == sizes.end();
    });

    SearchConfig cfg;
    cfg.ambient_r = a.dim;
    cfg.target = a.target;
    cfg.exploratory = a.exploratory;
    cfg.orbit_mode = parse_orbit_mode(a.orbit_mode);
    cfg.parity_prune = a.parity_prune;
    cfg.checked = a.checked;
    cfg.max_nodes_per_branch = a.max_nodes;
    if (a.l1 >= 0) cfg.l1_only = static_cast<PointIndex>(a.l1);
    cfg.max_l2_branches = a.max_l2;
    cfg.workers = a.workers;
    cfg.checkpoint_path = a.checkpoint;
    cfg.resume = a.resume;
    if (!a.seeds_spec.empty() && a.seeds_spec != "builtin:ovoid17") {
        std::string cur;
        for (char c : a.seeds_spec + ",") {
            if (c == ',') {
                if (!cur.empty()) cfg.seed_filter.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
    }

    std::cerr << "config digest will follow in the report; geometry digest "
              << digest_hex(ambient.digest) << "\n";
    SearchReport rep = run_search(ambient, seed_geo, seeds, cfg);
    std::cerr << "config=" << rep.config_digest << " report=" << rep.digest() << "\n";
    if (a.format == "text") {
        std::cout << "target " << rep.target << ", orbit mode " << rep.orbit_mode << "\n";
        for (const auto& sr : rep.seeds)
            std::cout << "  " << sr.class_id << ": nodes " << sr.nodes << ", caps " << sr.caps_found
                      << ", quantum " << sr.quantum_found << "\n";
        std::cout << "totals: nodes " << rep.total_nodes << ", caps " << rep.total_caps << ", quantum "
                  << rep.quantum_caps_found << (rep.truncated ? " (truncated run)" : "") << "\n"
                  << "config " << rep.config_digest << ", report digest " << rep.digest() << "\n";
    } else {
        std::cout << rep.to_json(true) << "\n";
    }

    if (!a.out_caps.empty() && !rep.found.empty()) {
        std::vector<Cap> found;
        for (const FoundCap& f : rep.found) found.push_back(Cap::from_points(ambient, f.points));
        write_cap_file(a.out_caps, found);
        std::cerr << "wrote " << found.size() << " caps to " << a.out_caps << "\n";
    }
    return rep.quantum_caps_found > 0 ? 4 : 0;
}

int cmd_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(std::string("bad JSON: ") + e.what());
    }
    std::string fmt = j.value("format", "");
    if (fmt == "qcaps-report-v1") {
        json stripped = j;
        stripped.erase("wall_seconds");
        stripped.erase("report_digest");
        std::string recomputed = digest_hex(fnv1a(stripped.dump()));
        bool ok = j.value("report_digest", "") == recomputed;
        std::cout << json{{"format", fmt},
                          {"config_digest", j.value("config_digest", "")},
                          {"report_digest", recomputed},
                          {"digest_matches", ok},
                          {"totals", j.value("totals", json{})},
                          {"truncated", j.value("truncated", false)}}
                         .dump()
                  << "\n";
        return ok ? 0 : 2;
    }
    if (fmt == "qcaps-search-checkpoint-v1" || fmt == "qcaps-classify-checkpoint-v1") {
        std::cout << json{{"format", fmt},
                          {"config_digest", j.value("config_digest", "")},
                          {"geometry_digest", j.value("geometry_digest", "")},
                          {"records", fmt == "qcaps-search-checkpoint-v1"
                                          ? j.value("records", json::array()).size()
                                          : j.value("levels", json::array()).size()}}
                         .dump()
                  << "\n";
        return 0;
    }
    throw DataError("unrecognized file format: " + fmt);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"caps in PG(r,4): classification, quantum predicates, exhaustive searches"};
    app.require_subcommand(1);

    // tables
    auto* tables = app.add_subcommand("tables", "build geometry tables, print counts or dumps");
    int t_dim = 4;
    std::string t_dump, t_format = "json";
    tables->add_option("--dim", t_dim, "projective dimension (2, 3 or 4)");
    tables->add_option("--dump", t_dump, "dump 'points' or 'hyperplanes' as index/coordinate lines");
    tables->add_option("--format", t_format, "json|text");

    // verify
    auto* verify = app.add_subcommand("verify", "verify a cap file and profile each cap");
    std::string v_path;
    bool v_checked = false, v_matrix = false;
    verify->add_option("file", v_path, "cap file (one JSON object per line)")->required();
    verify->add_flag("--checked", v_checked, "re-verify profiles through the slow paths");
    verify->add_flag("--matrix", v_matrix, "include the generator matrix rows in the output");

    // equiv
    auto* equiv = app.add_subcommand("equiv", "test two caps for collineation equivalence");
    std::string e_a, e_b;
    equiv->add_option("a", e_a, "cap file with the first cap")->required();
    equiv->add_option("b", e_b, "cap file with the second cap")->required();

    // classify
    auto* classify_cmd = app.add_subcommand("classify", "classify caps up to collineation equivalence");
    std::string c_input, c_cache, c_checkpoint;
    std::vector<int> c_sizes;
    double c_budget = 0;
    bool c_seeds_mode = false;
    classify_cmd->add_option("--input", c_input, "classify the caps in this file");
    classify_cmd->add_flag("--seeds-mode", c_seeds_mode, "generate cap classes in PG(3,4) from scratch");
    classify_cmd->add_option("--sizes", c_sizes, "sizes to report in seeds mode (default 13 15 17)");
    classify_cmd->add_option("--cache", c_cache, "write the seed cache here (seeds mode)");
    classify_cmd->add_option("--checkpoint", c_checkpoint, "generation checkpoint path");
    classify_cmd->add_option("--budget-seconds", c_budget, "soft budget; checkpoint and stop when hit");

    // search
    auto* search = app.add_subcommand("search", "exhaustive extension search for quantum caps");
    SearchArgs s;
    search->add_option("--dim", s.dim, "ambient projective dimension (default 4)");
    search->add_option("--target", s.target, "target cap size")->required();
    search->add_flag("--exploratory", s.exploratory, "allow any target; derive the section bound");
    search->add_option("--seeds", s.seeds_spec, "comma list of class ids, or builtin:ovoid17");
    search->add_option("--seed-cache", s.seed_cache, "seed cache path (loaded if present, else written)");
    search->add_option("--checkpoint", s.checkpoint, "search checkpoint path");
    search->add_flag("--resume", s.resume, "resume from --checkpoint");
    search->add_flag("--checked", s.checked, "cross-check every leaf and state rebuild");
    search->add_option("--orbit-mode", s.orbit_mode, "off|affine|stabilizer (default affine)");
    search->add_flag("--parity-prune", s.parity_prune,
                     "experimental mid-search parity prune (quantum findings unchanged)");
    search->add_option("--max-nodes", s.max_nodes, "per-branch node budget (bounded smoke runs)");
    search->add_option("--l1", s.l1, "restrict to the first-level branch at this point index");
    search->add_option("--max-l2", s.max_l2, "restrict to the first k second-level branches");
    search->add_option("--workers", s.workers, "worker threads (results independent of this)");
    search->add_option("--out", s.out_caps, "write found caps to this cap file");
    search->add_option("--gen-budget-seconds", s.gen_budget, "budget for on-the-fly seed generation");
    search->add_option("--gen-checkpoint", s.gen_checkpoint, "checkpoint for on-the-fly seed generation");
    search->add_option("--format", s.format, "json|text (stdout report format)");

    // report
    auto* report = app.add_subcommand("report", "validate and summarize a report or checkpoint file");
    std::string r_path;
    report->add_option("file", r_path, "report or checkpoint JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*tables) return cmd_tables(t_dim, t_dump, t_format);
        if (*verify) return cmd_verify(v_path, v_checked, v_matrix);
        if (*equiv) return cmd_equiv(e_a, e_b);
        if (*classify_cmd) {
            if (c_seeds_mode) return cmd_classify_seeds(c_cache, c_checkpoint, c_budget, c_sizes);
            if (!c_input.empty()) return cmd_classify_file(c_input);
            throw CLI::ValidationError("classify", "need --input or --seeds-mode");
        }
        if (*search) return cmd_search(s);
        if (*report) return cmd_report(r_path);
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const CrossCheckError& e) {
        std::cerr << "cross-check failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::logic_error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
