#ifndef CUBICON_HOMOLOGY_HPP
#define CUBICON_HOMOLOGY_HPP

#include "cubicon/bigint.hpp"
#include "cubicon/flowmap.hpp"
#include "cubicon/grid.hpp"

#include <string>
#include <vector>

#include <json.hpp>

namespace cubicon {

// Finitely generated graded abelian group: per-dimension rank plus torsion
// coefficients (each > 1, each dividing the next).
struct GradedGroup {
    std::vector<int> ranks;
    std::vector<std::vector<long long>> torsion;

    int rank(int k) const {
        return k >= 0 && k < static_cast<int>(ranks.size()) ? ranks[k] : 0;
    }
    std::vector<long long> torsion_at(int k) const {
        return k >= 0 && k < static_cast<int>(torsion.size()) ? torsion[k]
                                                             : std::vector<long long>{};
    }
    bool trivial() const;
    int top_nonzero() const; // largest k with rank or torsion, -1 if trivial
    bool operator==(const GradedGroup& o) const;
    std::string brief() const; // e.g. "H0=Z, H2=Z+Z/2"

    nlohmann::ordered_json to_json() const;
    static GradedGroup from_json(const nlohmann::json& j);
};

// H_*(N, exit) with integer coefficients via chain-complex reduction and
// Smith normal form.  The quotient complex keeps the faces of N that are
// not faces of exit, dropping boundary entries into removed faces.
GradedGroup relative_homology(const IndexPair& pair);

// Absolute homology (exit = {}).  Throws EmptySet.
GradedGroup homology(const CellSet& s);

// Universal coefficients over Z: same ranks, torsion shifted up one degree.
GradedGroup cohomology_from_homology(const GradedGroup& h);

struct DirectionalIndex {
    GradedGroup homological;
    GradedGroup cohomological;
    std::string pair_provenance;
    std::uint64_t n_cells = 0;
    std::uint64_t exit_cells = 0;
};

// Algebraic shadow of the Conley index of an isolated invariant set:
// graded groups of the forward and reverse index pairs plus the time
// duality cross-check (rank CH^k forward vs rank CH_{n-k} reverse in
// degrees 0 and n).
struct ConleyIndex {
    DirectionalIndex forward;
    DirectionalIndex reverse;
    bool duality_ok = false;
    bool trivial() const { return forward.cohomological.trivial() && reverse.cohomological.trivial(); }
    nlohmann::ordered_json to_json() const;
};

struct ConleyIndexOptions {
    IndexPairOptions pair;
    int isolation_collar = 2;
};

// Computes the index from index pairs built under the forward and reverse
// maps.  Throws NotIsolated if K is not isolated under the forward map.
ConleyIndex conley_index(const MultivaluedMap& forward_map,
                         const MultivaluedMap& reverse_map, const CellSet& k,
                         const ConleyIndexOptions& opts = {});

// Index of an attractor with a verified trapping region (pair = (region, {})).
ConleyIndex conley_index_trapping(const MultivaluedMap& forward_map,
                                  const MultivaluedMap& reverse_map,
                                  const CellSet& k);

struct ExactSequenceResult {
    bool pass = false;
    int fail_degree = -1;     // degree of the first violated exactness slot
    std::string fail_group;   // "repeller" | "total" | "attractor"
    bool torsion_checked = false;
    std::vector<int> image_ranks; // witness labels, one per map in the sequence
    std::string detail;
};

// Rank-level exactness check of
//   ... -> CH^k(repeller) -> CH^k(total) -> CH^k(attractor) -> CH^{k+1}(repeller) -> ...
// The image-rank labels are forced left to right; failure reports the first
// inconsistent slot.  Full torsion exactness is verified only when every
// group is free (the zero/Z cases).
ExactSequenceResult check_exact_sequence(const GradedGroup& attractor,
                                         const GradedGroup& total,
                                         const GradedGroup& repeller);

// ---- building blocks exposed for tests and the embedded self-test ----

// Boundary matrices of the (relative) cubical complex of a pair: entry
// matrices[k] is the matrix of d_k : C_k -> C_{k-1} given as column lists of
// (row, coefficient); sizes[k] = number of k-cells.
struct ChainComplexMatrices {
    std::vector<std::uint64_t> sizes;
    std::vector<std::vector<std::vector<std::pair<std::uint64_t, long long>>>> cols;
};

ChainComplexMatrices build_relative_complex(const CellSet& n, const CellSet& exit);

// Checks d(d(x)) = 0 for every cell (integer composition).
bool verify_dd_zero(const ChainComplexMatrices& cc);

// Homology of an explicit chain complex (used by tests with hand-built
// matrices, e.g. torsion cases).
GradedGroup homology_of_matrices(const ChainComplexMatrices& cc);

// Smith normal form diagonal (positive, divisibility-ordered, zero entries
// dropped) of a dense integer matrix.
std::vector<BigInt> smith_normal_form(std::vector<std::vector<BigInt>> m);

} // namespace cubicon

#endif
