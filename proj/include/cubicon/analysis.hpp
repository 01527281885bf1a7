#ifndef CUBICON_ANALYSIS_HPP
#define CUBICON_ANALYSIS_HPP

#include "cubicon/dynamics.hpp"
#include "cubicon/flowmap.hpp"
#include "cubicon/grid.hpp"
#include "cubicon/homology.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cubicon {

enum class SetRole {
    GlobalAttractorCandidate,
    ContinuedAttractor,
    SeparatingSet,
    AmbientAttractor,
};

const char* set_role_name(SetRole role);

struct InvariantSetRecord {
    double lambda = 0.0;
    SetRole role = SetRole::GlobalAttractorCandidate;
    CellSet cells;
    std::optional<ConleyIndex> index;
    std::optional<double> diameter;
    std::optional<CellSet> basin;
};

// Knobs shared by the analysis operations.
struct AnalysisOptions {
    OuterApproxOptions map;   // tau, samples_per_axis, bloat, tol, threads
    EscapePolicy policy;      // radius 0 = auto (2x grid box circumradius)
    int collar = 2;           // cell layers separating K from separator candidates

    // Separator refinement: the candidate set is re-examined under maps with
    // geometrically growing tau (restricted to a collar of the previous
    // candidate) until tau reaches separator_max_tau.  Longer snapshots
    // sharpen the degenerate normal directions that a single short-tau map
    // smears over many cells.
    bool refine_separator = true;
    double separator_max_tau = 64.0;
    double separator_tau_factor = 4.0;
    double separator_tol = 1e-6;
    // Final pass with no neighbor fattening and a denser sample lattice:
    // localizes the set to quantization accuracy.  sharp tau 0 means "use
    // the last ladder tau"; larger values integrate longer only for this
    // one pass.
    bool separator_sharp_final = true;
    double separator_sharp_tau = 0.0;
    double separator_early_exit = 3.0; // cells; 0 disables

    int attraction_samples = 100;   // per side, signature item iii
    double attraction_horizon = 80.0;
    double polarity_horizon = 80.0;

    enum class Seed { Global, Box } seed = Seed::Global;
    std::optional<Box> seed_box;
};

// ---- single-parameter operations ----

struct GlobalAttractorResult {
    InvariantSetRecord record; // role AmbientAttractor, basin = full grid
    bool isolated = false;     // invariant part avoids the grid edge layer
};

// A_lambda = invariant part of the whole grid, with the trapping property of
// the box verified (no escaping cells).  Throws NotTrapping with offending
// cells listed.  The index is computed from the pair (box, {}).
GlobalAttractorResult find_global_attractor(const ParametrizedFlow& flow, double lambda,
                                            GridPtr grid, const AnalysisOptions& opts);

struct TrappingCheck {
    double lambda = 0.0;
    bool trapping = false;
    std::vector<std::uint64_t> offending; // escaping cells (truncated)
};

struct UniformDissipativityResult {
    bool trapping_for_all = false;
    Box witness_box;
    std::vector<TrappingCheck> per_lambda;
};

// True iff the single grid box is trapping (no escaping cells) for every
// lambda in the grid.
UniformDissipativityResult uniform_dissipativity(const ParametrizedFlow& flow,
                                                 const std::vector<double>& lambda_grid,
                                                 GridPtr grid, const AnalysisOptions& opts);

struct ContinuationStep {
    double lambda = 0.0;
    CellSet cells;
    ConleyIndex index;
    bool is_global = false;   // equals the ambient invariant set
    bool isolation_refined = false; // isolation needed the automatic 2x refinement
};

struct ContinuationResult {
    std::vector<ContinuationStep> steps;
    bool completed = false;
    bool index_constant = false;
    std::optional<double> broken_at;        // isolation unrecoverable here
    std::optional<double> globality_lost_at; // first lambda with K != A
};

// Tracks the seed invariant set across the lambda grid (in the given order)
// by reusing the previous isolating neighborhood, verifying isolation at
// each step and refreshing the neighborhood as a collar of the new set.
ContinuationResult track_continuation(const ParametrizedFlow& flow,
                                      const std::vector<double>& lambda_grid,
                                      const InvariantSetRecord& seed, GridPtr grid,
                                      const AnalysisOptions& opts);

using MapPtr = std::shared_ptr<const MultivaluedMap>;

struct SeparatorResult {
    InvariantSetRecord record; // role SeparatingSet; may be empty
    bool isolated = false;
    double final_tau = 0.0;    // tau of the map that produced the final set
    int stages = 0;
    // maps of the final refinement stage; valid when the set is nonempty
    MapPtr map_fwd;
    MapPtr map_rev;
};

// C_lambda = invariant part of (grid minus a collar of K), refined under
// longer-tau restricted maps when refinement is enabled.  Empty result means
// no bounded invariant structure outside K at this resolution.
SeparatorResult extract_separator(const ParametrizedFlow& flow, double lambda,
                                  const InvariantSetRecord& k, GridPtr grid,
                                  const AnalysisOptions& opts);

struct AttractionSample {
    std::uint64_t cell = 0;
    bool ok = false;
    double entry_time = 0.0;
};

struct SignatureResult {
    bool separates = false;        // complement has exactly two components
    int complement_components = 0;
    bool k_in_bounded = false;
    bool sphere_homology = false;  // (Z, 0, ..., 0, Z) in degrees 0 and n-1
    GradedGroup c_homology;
    bool attracts_unbounded = false;
    bool repels_bounded = false;
    double entry_time_bound = 0.0; // common forward entry bound, unbounded side
    int samples_per_side = 0;
    double diameter = 0.0;
    bool all_pass() const {
        return separates && k_in_bounded && sphere_homology && attracts_unbounded &&
               repels_bounded;
    }
};

// Signature of a separating set: separation of the grid box, sphere
// homology, sampled uniform attraction from the unbounded side and
// repulsion on the bounded side, and the diameter for sweep-level checks.
SignatureResult coercivity_signature(const ParametrizedFlow& flow, double lambda,
                                     const InvariantSetRecord& c,
                                     const InvariantSetRecord& k, GridPtr grid,
                                     const AnalysisOptions& opts);

struct PolarityWitness {
    double lambda = 0.0;
    double level = 0.0;  // L
    double t_lambda = 0.0;
    std::vector<double> start;
    double backward_min_norm = 0.0; // min norm over the tail beyond t_lambda
    bool forward_bounded = false;
    bool valid = false;
};

struct PolarityLevel {
    double level = 0.0;
    std::optional<double> lambda_hat; // largest grid lambda whose tail all has witnesses
    std::vector<PolarityWitness> witnesses;
};

struct PolarityResult {
    bool polar = false;
    std::vector<PolarityLevel> levels;
};

// Polar family test: for every threshold L there must be a tail of the
// lambda grid whose separating sets carry bounded trajectories with backward
// tails of norm beyond L.
PolarityResult polarity_test(const ParametrizedFlow& flow,
                             const std::vector<double>& lambda_grid,
                             const std::vector<double>& levels, GridPtr grid,
                             const AnalysisOptions& opts);

// ---- family pipeline ----

struct LambdaReport {
    double lambda = 0.0;
    bool trapping = false;
    std::uint64_t ambient_cells = 0;
    std::optional<ConleyIndex> ambient_index;
    std::uint64_t k_cells = 0;
    CellSet k_set;
    CellSet c_set;
    std::optional<ConleyIndex> k_index;
    bool k_is_global = false;
    std::uint64_t c_cells = 0;
    double c_diameter = 0.0;
    std::optional<ConleyIndex> c_index;
    bool c_isolated = false;
    double separator_tau = 0.0;
    std::optional<SignatureResult> signature;
    std::optional<ExactSequenceResult> exact_sequence;
    std::vector<std::string> notes;
};

struct FamilyVerdict {
    std::vector<double> lambda_grid;      // ascending
    std::vector<LambdaReport> per_lambda; // matching lambda_grid order
    bool uniform_trapping = false;
    Box witness_box;
    bool global_continuation_ok = false;
    std::optional<double> globality_lost_at;
    std::optional<double> continuation_broken_at;
    bool continuation_index_constant = false;
    bool uniform_dissipative = false; // trapping for all and global continuation intact
    PolarityResult polarity;
    bool polar = false;
    bool coercive = false;
    std::string coercive_note;
    std::string failure_mode; // which dissipativity failure a polar family exhibits
    std::vector<std::string> notes;
};

// Runs the whole battery over the family: per-lambda ambient attractors and
// trapping checks, continuation of the seed, separating sets with signatures
// and Conley indices, the exact-sequence test, polarity and the family-level
// verdicts.  Lambdas are processed in the given order (the first is the
// continuation seed); the verdict lists them in ascending order.
FamilyVerdict analyze_family(const ParametrizedFlow& flow,
                             const std::vector<double>& lambda_grid, GridPtr grid,
                             const AnalysisOptions& opts,
                             const std::vector<double>& polarity_levels);

} // namespace cubicon

#endif
