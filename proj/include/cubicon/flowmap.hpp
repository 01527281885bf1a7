#ifndef CUBICON_FLOWMAP_HPP
#define CUBICON_FLOWMAP_HPP

#include "cubicon/dynamics.hpp"
#include "cubicon/grid.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cubicon {

// Combinatorial outer approximation of the time-tau flow map: each domain
// cell maps to a sorted, deduplicated set of target cells.  Cells whose
// image meets the exterior of the grid box (or of the restriction set, or
// of the escape ball) are marked escaping.
struct MultivaluedMap {
    GridPtr grid;
    std::vector<std::uint64_t> offsets; // size cell_count()+1
    std::vector<std::uint32_t> targets;
    CellSet domain;   // cells with computed images
    CellSet escaping; // subset of domain
    bool integrator_diagnostics = false; // some cell hit an integrator error

    bool in_domain(std::uint64_t cell) const { return domain.contains(cell); }
    bool is_escaping(std::uint64_t cell) const { return escaping.contains(cell); }
    std::pair<const std::uint32_t*, const std::uint32_t*> image(std::uint64_t cell) const {
        return {targets.data() + offsets[cell], targets.data() + offsets[cell + 1]};
    }
    // Union of images of all cells of s (escaping cells contribute their
    // in-grid targets as well).
    CellSet image_of(const CellSet& s) const;
};

struct OuterApproxOptions {
    double tau = 0.5;
    int samples_per_axis = 2; // >= 2: cell corners plus interior lattice
    int bloat = 1;            // layers of neighbor fattening; -1 = auto from lipschitz_hint
    double tol = 1e-8;
    int threads = 1;
    // When set, images are computed only for these cells.
    std::optional<CellSet> restrict_to;
    // Treatment of targets outside the restriction: Escape marks the source
    // cell escaping (exterior semantics, preserves exit structure); Drop
    // silently discards those targets (the cell keeps its in-set images),
    // matching invariant_part's view of a subregion.
    enum class RestrictionMode { Escape, Drop };
    RestrictionMode restriction_mode = RestrictionMode::Escape;
    // For restricted maps: abort a sample integration once its norm leaves
    // the bounding annulus of the restriction inflated by this many cells
    // (the sample then counts as leaving the restriction).  Sound whenever
    // only the invariant part of the restriction is consumed: invariant
    // cells never reach the inflated annulus.  0 disables the shortcut.
    double early_exit_margin = 0.0;
};

MultivaluedMap outer_approximation(const ParametrizedFlow& flow, double lambda,
                                   GridPtr grid, const EscapePolicy& policy,
                                   const OuterApproxOptions& opts);

// Largest S' inside S such that every cell of S' has an image-successor and
// a preimage-predecessor in S' (cells on bi-infinite itineraries).  Escaping
// cells never belong to S'.
CellSet invariant_part(const MultivaluedMap& map, const CellSet& s);

struct IsolationResult {
    bool isolating = false;
    CellSet invariant; // invariant part of N, returned for reuse
};

// True iff invariant_part(map, N) avoids the one-cell-thick inner boundary
// layer of N.
IsolationResult is_isolating(const MultivaluedMap& map, const CellSet& n);

// Combinatorial index pair (N, exit):  N \ exit maps into N.
struct IndexPair {
    CellSet n;
    CellSet exit;
    CellSet entrance; // boundary-layer cells of N that are not exit cells
    std::string provenance;
};

struct IndexPairOptions {
    // Number of forward-image iterations allowed when trying to close N into
    // a positively invariant set (attractor-style pair with empty exit).
    int hull_iterations = 24;
};

// Builds an index pair around the invariant set K.  If the forward hull of K
// closes up within the budget the pair has an empty exit set; otherwise
// N = K plus one forward collar with exit = cells of N whose image leaves N.
// Throws NotIsolated if K meets escaping cells or the grid edge.
IndexPair index_pair(const MultivaluedMap& map, const CellSet& k,
                     const IndexPairOptions& opts = {});

// Index pair (entire domain of the map, empty exit).  Valid for a global
// attractor inside a verified trapping region.
IndexPair trapping_region_pair(const MultivaluedMap& map);

// Map with explicitly given images (tests, self-test, synthetic fixtures).
// images[i] lists the targets of cell i; every cell is in the domain.
MultivaluedMap synthetic_map(GridPtr grid,
                             const std::vector<std::vector<std::uint32_t>>& images,
                             const CellSet& escaping);

} // namespace cubicon

#endif
