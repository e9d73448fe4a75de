#pragma once

// The code-theoretic side of the cap dictionary: the [n, r+1] linear code
// whose generator columns are the cap points, its weight distribution and
// strength, and the three equivalent conditions for the generated code to be
// a quantum stabilizer code:
//   - all codeword weights even,
//   - every hyperplane section has the parity of n,
//   - the row space is Hermitian self-orthogonal.
// quantum_check computes all three independently and treats disagreement as
// an internal bug, never as data.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qcaps/caps.hpp"

namespace qcaps {

struct GeneratorMatrix {
    int k = 0;  // rows = r + 1, fixed by the ambient dimension
    int n = 0;  // columns = cap size
    std::vector<Vec> cols;  // column j = normalized coordinates of j-th point
};

struct WeightDistribution {
    std::vector<std::uint64_t> counts;  // counts[w] = # codewords of weight w
};

struct QuantumParams {
    int n = 0, k = 0, d = 0;
};

struct CodeProfile {
    int n = 0;
    int k = 0;
    int rank = 0;  // column-space rank; k stays ambient even if deficient
    int strength = 0;
    bool even = false;
    bool hermitian = false;
    bool parity = false;
    std::optional<QuantumParams> quantum;

    bool is_quantum() const { return quantum.has_value(); }
};

// Raised when the three equivalent predicates disagree; signals an
// implementation bug and must never be swallowed.
struct CrossCheckError : std::logic_error {
    using std::logic_error::logic_error;
};

inline constexpr int kMaxEnumerationK = 5;   // 4^k message enumeration cap
inline constexpr int kDefaultStrengthLimit = 4;

GeneratorMatrix generator_from_cap(const Cap& cap);

WeightDistribution weight_distribution(const GeneratorMatrix& g);

bool all_weights_even(const GeneratorMatrix& g);

bool hyperplane_parity_ok(const Cap& cap);

bool hermitian_selforthogonal(const GeneratorMatrix& g);

// Largest t <= limit such that every t columns are linearly independent
// (capped at n for short matrices).
int strength(const GeneratorMatrix& g, int limit);

CodeProfile quantum_check(const Cap& cap);

}  // namespace qcaps
