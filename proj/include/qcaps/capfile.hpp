#pragma once

// External formats: cap files (one JSON object per line), code profiles,
// class reports, seed caches, and collineation witnesses.
//
// Cap line: {"dim": r, "n": size, "points": ["01W00", ...]} with points
// normalized and sorted; the reader rejects anything else, and names the
// first collinear triple when the point set is not a cap.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcaps/caps.hpp"
#include "qcaps/codes.hpp"
#include "qcaps/equivalence.hpp"

namespace qcaps {

using json = nlohmann::json;

// Malformed or inconsistent input data (exit code 2 at the CLI).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Lazily built geometries, keyed by projective dimension.
struct GeometryCache {
    const GeometryTables& get(int r);

  private:
    std::map<int, GeometryTables> built_;
};

json cap_to_json(const Cap& cap);

// Validating parse; throws DataError with a diagnostic (naming the first
// collinear triple for non-caps).
Cap cap_from_json(const json& j, GeometryCache& cache);

struct CapFileEntry {
    int line_no = 0;
    std::string raw;
    std::optional<Cap> cap;  // empty on error
    std::string error;
};

std::vector<CapFileEntry> read_cap_file(const std::string& path, GeometryCache& cache);

void write_cap_file(const std::string& path, std::span<const Cap> caps);

json profile_to_json(const CodeProfile& p);

// rows of coordinate strings
json generator_to_json(const GeneratorMatrix& g);

json collineation_to_json(const Collineation& s);

json class_report_to_json(int size, std::span<const CapClass> classes);

}  // namespace qcaps
