#include "qcaps/capfile.hpp"

#include <algorithm>
#include <fstream>

namespace qcaps {

const GeometryTables& GeometryCache::get(int r) {
    auto it = built_.find(r);
    if (it == built_.end()) it = built_.emplace(r, GeometryTables::build(r)).first;
    return it->second;
}

json cap_to_json(const Cap& cap) {
    json pts = json::array();
    cap.members.for_each([&](int p) { pts.push_back(vec_to_string(cap.geo->points[p])); });
    return json{{"dim", cap.geo->r}, {"n", cap.size}, {"points", pts}};
}

Cap cap_from_json(const json& j, GeometryCache& cache) {
    if (!j.is_object() || !j.contains("dim") || !j.contains("points"))
        throw DataError("cap line must be an object with dim and points");
    int dim = j.at("dim").get<int>();
    if (dim < 2 || dim > 4) throw DataError("dim must be 2, 3 or 4");
    const GeometryTables& g = cache.get(dim);

    std::vector<PointIndex> pts;
    bool have_prev = false;
    std::uint16_t prev_pack = 0;
    for (const auto& pj : j.at("points")) {
        std::string s = pj.get<std::string>();
        if (static_cast<int>(s.size()) != dim + 1)
            throw DataError("point \"" + s + "\" has wrong coordinate count for dim " + std::to_string(dim));
        Vec v = vec_from_string(s);
        if (vec_is_zero(v)) throw DataError("zero vector is not a point");
        if (!(normalize_vec(v) == v)) throw DataError("point \"" + s + "\" is not normalized");
        // strictly sorted under the element order 0 < 1 < w < W
        std::uint16_t pack = vec_pack(v);
        if (have_prev && prev_pack >= pack)
            throw DataError("points must be strictly sorted; \"" + s + "\" out of order");
        prev_pack = pack;
        have_prev = true;
        pts.push_back(g.point_index(v));
    }
    if (j.contains("n") && j.at("n").get<int>() != static_cast<int>(pts.size()))
        throw DataError("n does not match the number of points");

    if (auto t = find_collinear_triple(g, pts)) {
        throw DataError("not a cap: collinear triple " + vec_to_string(g.points[t->a]) + " " +
                        vec_to_string(g.points[t->b]) + " " + vec_to_string(g.points[t->c]));
    }
    return Cap::from_points(g, pts);
}

std::vector<CapFileEntry> read_cap_file(const std::string& path, GeometryCache& cache) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open cap file: " + path);
    std::vector<CapFileEntry> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        CapFileEntry e;
        e.line_no = line_no;
        e.raw = line;
        try {
            json j = json::parse(line);
            e.cap = cap_from_json(j, cache);
        } catch (const json::exception& ex) {
            e.error = std::string("bad JSON: ") + ex.what();
        } catch (const DataError& ex) {
            e.error = ex.what();
        }
        out.push_back(std::move(e));
    }
    return out;
}

void write_cap_file(const std::string& path, std::span<const Cap> caps) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const Cap& c : caps) out << cap_to_json(c).dump() << "\n";
}

json profile_to_json(const CodeProfile& p) {
    json q;
    if (p.quantum)
        q = json::array({p.quantum->n, p.quantum->k, p.quantum->d});
    else
        q = nullptr;
    return json{{"n", p.n},          {"k", p.k},           {"rank", p.rank}, {"strength", p.strength},
                {"even", p.even},    {"hermitian", p.hermitian},             {"parity", p.parity},
                {"quantum", q}};
}

json generator_to_json(const GeneratorMatrix& g) {
    json rows = json::array();
    for (int i = 0; i < g.k; ++i) {
        std::string row;
        for (const Vec& col : g.cols) row.push_back(gf4_to_char(col.c[i]));
        rows.push_back(row);
    }
    return rows;
}

json collineation_to_json(const Collineation& s) {
    json rows = json::array();
    for (int i = 0; i < s.dim; ++i) {
        std::string row;
        for (int j = 0; j < s.dim; ++j) row.push_back(gf4_to_char(s.m[i][j]));
        rows.push_back(row);
    }
    return json{{"matrix", rows}, {"frobenius", s.frobenius}};
}

json class_report_to_json(int size, std::span<const CapClass> classes) {
    json arr = json::array();
    for (const CapClass& c : classes) {
        arr.push_back(json{{"representative", cap_to_json(c.representative)},
                           {"count", c.count},
                           {"stabilizer_order", c.stabilizer_order},
                           {"complete", c.complete}});
    }
    return json{{"size", size}, {"classes", arr}};
}

}  // namespace qcaps
