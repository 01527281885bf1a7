#include "cubicon/analysis.hpp"
#include "cubicon/errors.hpp"

#include <climits>
#include <algorithm>
#include <cmath>
#include <map>

namespace cubicon {

const char* set_role_name(SetRole role) {
    switch (role) {
        case SetRole::GlobalAttractorCandidate: return "global_attractor_candidate";
        case SetRole::ContinuedAttractor: return "continued_attractor";
        case SetRole::SeparatingSet: return "separating_set";
        case SetRole::AmbientAttractor: return "ambient_attractor";
    }
    return "?";
}

namespace {

EscapePolicy resolve_policy(const GridPtr& grid, const AnalysisOptions& opts) {
    EscapePolicy p = opts.policy;
    if (p.radius <= 0) p.radius = 2.0 * grid->box().circumradius();
    if (p.radius <= grid->box().circumradius())
        throw ConfigError("escape radius must exceed the grid box circumradius");
    return p;
}

MultivaluedMap full_map(const ParametrizedFlow& flow, double lambda, GridPtr grid,
                        const EscapePolicy& policy, const AnalysisOptions& opts) {
    return outer_approximation(flow, lambda, grid, policy, opts.map);
}

MultivaluedMap restricted_map(const ParametrizedFlow& flow, double lambda, GridPtr grid,
                              const EscapePolicy& policy, const AnalysisOptions& opts,
                              const CellSet& region, double tau, double tol,
                              int bloat_override = INT_MIN, int samples_override = 0,
                              double early_exit = 0.0, bool drop_mode = false) {
    OuterApproxOptions mo = opts.map;
    mo.restrict_to = region;
    mo.tau = tau;
    mo.tol = tol;
    if (bloat_override != INT_MIN) mo.bloat = bloat_override;
    if (samples_override > 0) mo.samples_per_axis = samples_override;
    mo.early_exit_margin = early_exit;
    if (drop_mode) mo.restriction_mode = OuterApproxOptions::RestrictionMode::Drop;
    return outer_approximation(flow, lambda, grid, policy, mo);
}

std::vector<std::uint64_t> escaping_sample(const MultivaluedMap& map, size_t cap = 16) {
    std::vector<std::uint64_t> out;
    map.escaping.for_each([&](std::uint64_t c) {
        if (out.size() < cap) out.push_back(c);
    });
    return out;
}

// deterministic spread of ~want cells out of a set
std::vector<std::uint64_t> spread_sample(const CellSet& s, int want) {
    std::vector<std::uint64_t> idx = s.to_indices();
    if (static_cast<int>(idx.size()) <= want) return idx;
    std::vector<std::uint64_t> out;
    out.reserve(want);
    double step = static_cast<double>(idx.size()) / want;
    for (int i = 0; i < want; ++i)
        out.push_back(idx[static_cast<size_t>(i * step)]);
    return out;
}

bool state_in_box(const Box& box, const std::vector<double>& x) {
    return box.contains(x.data());
}

// Snapshot time for reverse index pairs around the set: short enough that
// reverse images stay inside the working collar even when the reverse-time
// dynamics is strongly expanding (a reverse pair is a valid index pair at
// any snapshot time).
double reverse_tau_for(const ParametrizedFlow& flow, double lambda, const CellSet& k,
                       GridPtr grid, double tau) {
    const int n = grid->dim();
    std::vector<double> x(n), f(n);
    double vmax = 0;
    for (std::uint64_t cell : spread_sample(k, 64)) {
        grid->cell_center(cell, x.data());
        flow.eval(x.data(), lambda, f.data());
        double s = 0;
        for (int a = 0; a < n; ++a) s += f[a] * f[a];
        vmax = std::max(vmax, std::sqrt(s));
    }
    if (vmax <= 0) return tau;
    double h = grid->cell_side(0);
    for (int a = 1; a < n; ++a) h = std::min(h, grid->cell_side(a));
    return std::min(tau, 2.0 * h / vmax);
}

} // namespace

GlobalAttractorResult find_global_attractor(const ParametrizedFlow& flow, double lambda,
                                            GridPtr grid, const AnalysisOptions& opts) {
    EscapePolicy policy = resolve_policy(grid, opts);
    MultivaluedMap fwd = full_map(flow, lambda, grid, policy, opts);
    if (!fwd.escaping.empty()) {
        auto off = escaping_sample(fwd);
        std::string msg = "grid box is not trapping at lambda=" + std::to_string(lambda) +
                          "; escaping cells:";
        for (std::uint64_t c : off) msg += " " + std::to_string(c);
        throw NotTrapping(msg);
    }
    CellSet full = CellSet::full(grid);
    CellSet a = invariant_part(fwd, full);
    if (a.empty())
        throw Error("trapping box with empty invariant part; grid too coarse");

    GlobalAttractorResult res;
    res.isolated = !a.intersects(full.boundary_layer());

    double tau_rev = reverse_tau_for(flow, lambda, a, grid, opts.map.tau);
    MultivaluedMap rev = restricted_map(reverse_flow(flow), lambda, grid, policy, opts,
                                        a.dilate(3), tau_rev, opts.map.tol);
    InvariantSetRecord rec;
    rec.lambda = lambda;
    rec.role = SetRole::GlobalAttractorCandidate;
    rec.cells = a;
    rec.index = conley_index_trapping(fwd, rev, a);
    rec.diameter = diameter(a);
    rec.basin = full;
    res.record = std::move(rec);
    return res;
}

UniformDissipativityResult uniform_dissipativity(const ParametrizedFlow& flow,
                                                 const std::vector<double>& lambda_grid,
                                                 GridPtr grid, const AnalysisOptions& opts) {
    EscapePolicy policy = resolve_policy(grid, opts);
    UniformDissipativityResult res;
    res.witness_box = grid->box();
    res.trapping_for_all = true;
    for (double lambda : lambda_grid) {
        MultivaluedMap fwd = full_map(flow, lambda, grid, policy, opts);
        TrappingCheck tc;
        tc.lambda = lambda;
        tc.trapping = fwd.escaping.empty();
        if (!tc.trapping) {
            tc.offending = escaping_sample(fwd);
            res.trapping_for_all = false;
        }
        res.per_lambda.push_back(std::move(tc));
    }
    return res;
}

namespace {

// Continuation bookkeeping shared between track_continuation and the family
// pipeline.
struct ContinuationState {
    CellSet prev_n;   // isolating neighborhood carried to the next lambda
    bool have_prev = false;
};

struct StepOutcome {
    CellSet k;
    bool isolated = true;
    bool refined = false;
};

StepOutcome continuation_step(const ParametrizedFlow& flow, double lambda,
                              const MultivaluedMap& fwd, GridPtr grid,
                              const EscapePolicy& policy, const AnalysisOptions& opts,
                              ContinuationState& st, const CellSet* seed) {
    (void)grid;
    StepOutcome out;
    if (!st.have_prev) {
        // The combinatorial invariant part of a sink smears over a small
        // ball that may exceed the given seed box.  Grow the neighborhood
        // until the connected invariant piece meeting the seed isolates on
        // its own collar; the connectivity restriction keeps disjoint
        // invariant structures (a surrounding cycle, say) out of the seed.
        CellSet n0 = seed->dilate(opts.collar);
        for (int tries = 0; tries < 10; ++tries) {
            IsolationResult iso = is_isolating(fwd, n0);
            CellSet cand(fwd.grid);
            for (const CellSet& comp : components(iso.invariant))
                if (comp.intersects(*seed)) {
                    cand = comp;
                    break;
                }
            if (!cand.empty()) {
                CellSet nk = cand.dilate(opts.collar);
                IsolationResult check = is_isolating(fwd, nk);
                if (check.isolating && check.invariant.is_subset_of(cand.dilate(1))) {
                    out.k = check.invariant;
                    st.prev_n = out.k.dilate(opts.collar);
                    st.have_prev = true;
                    return out;
                }
            }
            CellSet grown = iso.invariant;
            grown.unite(n0);
            n0 = grown.dilate(opts.collar);
        }
        throw NotIsolated("continuation seed is not isolated at lambda=" +
                          std::to_string(lambda));
    }
    IsolationResult iso = is_isolating(fwd, st.prev_n);
    if (!iso.isolating) {
        // one automatic 2x refinement before giving up: verify isolation of
        // the refined neighborhood under a refined-grid map
        CellSet n2 = st.prev_n.refine2();
        GridPtr g2 = n2.grid();
        OuterApproxOptions mo = opts.map;
        mo.restrict_to = n2;
        MultivaluedMap fwd2 = outer_approximation(flow, lambda, g2, policy, mo);
        IsolationResult iso2 = is_isolating(fwd2, n2);
        if (!iso2.isolating)
            throw ContinuationBroken("isolation unrecoverable at lambda=" +
                                     std::to_string(lambda));
        out.refined = true;
    }
    out.k = iso.invariant;
    if (out.k.empty())
        throw ContinuationBroken("continued invariant set vanished at lambda=" +
                                 std::to_string(lambda));
    st.prev_n = out.k.dilate(opts.collar);
    return out;
}

bool index_equal(const ConleyIndex& a, const ConleyIndex& b) {
    return a.forward.homological == b.forward.homological &&
           a.forward.cohomological == b.forward.cohomological;
}

ConleyIndex index_for(const ParametrizedFlow& flow, double lambda,
                      const MultivaluedMap& fwd, GridPtr grid, const EscapePolicy& policy,
                      const AnalysisOptions& opts, const CellSet& k, bool global,
                      bool trapping) {
    double tau_rev = reverse_tau_for(flow, lambda, k, grid, opts.map.tau);
    MultivaluedMap rev = restricted_map(reverse_flow(flow), lambda, grid, policy, opts,
                                        k.dilate(4), tau_rev, opts.map.tol);
    if (global && trapping) return conley_index_trapping(fwd, rev, k);
    return conley_index(fwd, rev, k);
}

} // namespace

ContinuationResult track_continuation(const ParametrizedFlow& flow,
                                      const std::vector<double>& lambda_grid,
                                      const InvariantSetRecord& seed, GridPtr grid,
                                      const AnalysisOptions& opts) {
    if (lambda_grid.empty())
        throw ConfigError("continuation needs a nonempty lambda grid");
    EscapePolicy policy = resolve_policy(grid, opts);
    ContinuationResult res;
    ContinuationState st;
    CellSet full = CellSet::full(grid);
    std::optional<ConleyIndex> seed_index;
    res.index_constant = true;
    for (double lambda : lambda_grid) {
        MultivaluedMap fwd = full_map(flow, lambda, grid, policy, opts);
        bool trapping = fwd.escaping.empty();
        CellSet ambient = invariant_part(fwd, full);
        StepOutcome so;
        try {
            so = continuation_step(flow, lambda, fwd, grid, policy, opts, st, &seed.cells);
        } catch (const ContinuationBroken&) {
            res.broken_at = lambda;
            break;
        }
        ContinuationStep step;
        step.lambda = lambda;
        step.cells = so.k;
        step.is_global = (so.k == ambient);
        step.isolation_refined = so.refined;
        step.index = index_for(flow, lambda, fwd, grid, policy, opts, so.k,
                               step.is_global, trapping);
        if (!seed_index)
            seed_index = step.index;
        else if (!index_equal(*seed_index, step.index))
            res.index_constant = false;
        if (!step.is_global && !res.globality_lost_at) res.globality_lost_at = lambda;
        res.steps.push_back(std::move(step));
    }
    res.completed = !res.broken_at.has_value() && res.steps.size() == lambda_grid.size();
    return res;
}

namespace {

struct SeparatorInternal {
    CellSet cells;       // reported separating set (sharpest localization)
    CellSet index_cells; // invariant band of the index map (superset of cells)
    MapPtr fwd;          // map with exterior semantics; carries the exit structure
    MapPtr rev;          // reverse twin of fwd on the same restriction
    double tau = 0.0;
    int stages = 0;
    bool sharpened = false;
};

SeparatorInternal separator_cells(const ParametrizedFlow& flow, double lambda,
                                  const CellSet& k_cells, GridPtr grid,
                                  const EscapePolicy& policy, const AnalysisOptions& opts,
                                  const MultivaluedMap* base_map) {
    SeparatorInternal out;
    CellSet region = CellSet::full(grid);
    region.subtract(k_cells.dilate(opts.collar));

    MapPtr base;
    if (base_map)
        base = MapPtr(base_map, [](const MultivaluedMap*) {});
    else
        base = std::make_shared<MultivaluedMap>(
            full_map(flow, lambda, grid, policy, opts));
    out.cells = invariant_part(*base, region);
    out.index_cells = out.cells;
    out.fwd = base;
    out.tau = opts.map.tau;

    int margin = std::max(opts.map.bloat, 1) + 3;
    double ee = opts.separator_early_exit;
    if (!out.cells.empty() && opts.refine_separator) {
        double tau = opts.map.tau;
        while (tau * opts.separator_tau_factor <= opts.separator_max_tau * 1.0000001) {
            tau *= opts.separator_tau_factor;
            CellSet stage_region = out.cells.dilate(margin);
            stage_region.subtract(k_cells.dilate(opts.collar));
            auto stage_map = std::make_shared<MultivaluedMap>(restricted_map(
                flow, lambda, grid, policy, opts, stage_region, tau, opts.separator_tol,
                INT_MIN, 0, ee));
            CellSet next = invariant_part(*stage_map, stage_region);
            if (next.empty()) break; // set dissolved: keep the previous stage
            out.cells = std::move(next);
            out.index_cells = out.cells;
            out.fwd = stage_map;
            out.tau = tau;
            ++out.stages;
        }
    }

    if (out.cells.empty()) return out;

    // reverse twin of the index map
    ParametrizedFlow rf = reverse_flow(flow);
    {
        CellSet rev_region = out.index_cells.dilate(margin);
        rev_region.subtract(k_cells.dilate(opts.collar));
        out.rev = std::make_shared<MultivaluedMap>(restricted_map(
            rf, lambda, grid, policy, opts, rev_region, out.tau, opts.separator_tol,
            INT_MIN, 0, ee));
    }

    // Quantization-only localization pass for the reported set: no neighbor
    // fattening, denser sample lattice, dropped (not exterior-marked)
    // restriction leavers so that cells straddling the invariant set survive.
    // The index pair keeps the fattened map above; this pass only sharpens
    // the reported cells and the diameter.
    if (opts.separator_sharp_final && opts.refine_separator && out.stages > 0) {
        int final_samples = std::max(3, opts.map.samples_per_axis);
        double sharp_tau = std::max(opts.separator_sharp_tau, out.tau);
        CellSet stage_region = out.cells.dilate(margin);
        stage_region.subtract(k_cells.dilate(opts.collar));
        MultivaluedMap sharp =
            restricted_map(flow, lambda, grid, policy, opts, stage_region, sharp_tau,
                           opts.separator_tol, 0, final_samples, ee, true);
        CellSet next = invariant_part(sharp, stage_region);
        if (!next.empty()) {
            out.cells = std::move(next);
            out.sharpened = true;
        }
    }
    return out;
}

} // namespace

SeparatorResult extract_separator(const ParametrizedFlow& flow, double lambda,
                                  const InvariantSetRecord& k, GridPtr grid,
                                  const AnalysisOptions& opts) {
    EscapePolicy policy = resolve_policy(grid, opts);
    SeparatorInternal si =
        separator_cells(flow, lambda, k.cells, grid, policy, opts, nullptr);
    SeparatorResult res;
    res.record.lambda = lambda;
    res.record.role = SetRole::SeparatingSet;
    res.record.cells = si.cells;
    res.final_tau = si.tau;
    res.stages = si.stages;
    res.map_fwd = si.fwd;
    res.map_rev = si.rev;
    if (si.cells.empty()) return res;

    res.record.diameter = diameter(si.cells);
    IsolationResult iso = is_isolating(*si.fwd, si.index_cells.dilate(opts.collar));
    res.isolated = iso.isolating;
    res.record.index = conley_index(*si.fwd, *si.rev, si.index_cells);
    return res;
}

SignatureResult coercivity_signature(const ParametrizedFlow& flow, double lambda,
                                     const InvariantSetRecord& c,
                                     const InvariantSetRecord& k, GridPtr grid,
                                     const AnalysisOptions& opts) {
    if (c.cells.empty())
        throw EmptySet("coercivity_signature needs a nonempty separating set");
    EscapePolicy policy = resolve_policy(grid, opts);
    const int n = grid->dim();
    SignatureResult sig;
    sig.diameter = diameter(c.cells);

    CellSet complement = CellSet::full(grid);
    complement.subtract(c.cells);
    std::vector<CellSet> comps = components(complement);
    sig.complement_components = static_cast<int>(comps.size());
    sig.separates = comps.size() == 2;

    const CellSet* bounded = nullptr;
    const CellSet* unbounded = nullptr;
    for (const CellSet& comp : comps) {
        if (!comp.grid_edge_cells().empty()) {
            if (!unbounded) unbounded = &comp;
        } else if (!bounded) {
            bounded = &comp;
        }
    }
    if (sig.separates && bounded && unbounded)
        sig.k_in_bounded = k.cells.intersects(*bounded) && !k.cells.intersects(*unbounded);

    sig.c_homology = homology(c.cells);
    {
        bool ok = true;
        for (int d = 0; d <= sig.c_homology.top_nonzero(); ++d)
            if (!sig.c_homology.torsion_at(d).empty()) ok = false;
        if (n == 1) {
            ok = ok && sig.c_homology.rank(0) == 2 && sig.c_homology.top_nonzero() <= 0;
        } else {
            for (int d = 0; d <= std::max(sig.c_homology.top_nonzero(), n - 1); ++d) {
                int expect = (d == 0 || d == n - 1) ? 1 : 0;
                if (sig.c_homology.rank(d) != expect) ok = false;
            }
        }
        sig.sphere_homology = ok;
    }

    if (!bounded || !unbounded) return sig;

    IntegrateOptions iopts;
    iopts.tol = opts.map.tol;
    CellSet c_near = c.cells.dilate(opts.collar);
    CellSet c_wide = c.cells.dilate(opts.collar + 2);
    CellSet k_near = k.cells.dilate(opts.collar);

    // unbounded side: forward trajectories must reach a collar of C by a
    // common time bound and stay nearby
    CellSet u_cand = *unbounded;
    u_cand.subtract(c_wide);
    sig.samples_per_side = opts.attraction_samples;
    std::vector<std::uint64_t> u_samples = spread_sample(u_cand, opts.attraction_samples);
    bool attracts = !u_samples.empty();
    double entry_bound = 0.0;
    std::vector<double> x0(n);
    for (std::uint64_t cell : u_samples) {
        grid->cell_center(cell, x0.data());
        Trajectory tr = integrate(flow, lambda, x0, opts.attraction_horizon, policy, iopts);
        bool entered = false;
        bool stayed = true;
        double t_entry = 0.0;
        for (const auto& s : tr.samples) {
            std::uint64_t loc = grid->locate(s.state.data());
            if (!entered) {
                if (loc != UINT64_MAX && c_near.contains(loc)) {
                    entered = true;
                    t_entry = s.t;
                }
            } else if (loc == UINT64_MAX || !c_wide.contains(loc)) {
                stayed = false;
                break;
            }
        }
        if (tr.escaped || !entered || !stayed) attracts = false;
        entry_bound = std::max(entry_bound, t_entry);
    }
    sig.attracts_unbounded = attracts;
    sig.entry_time_bound = entry_bound;

    // bounded side: forward trajectories leave every collar of C and fall
    // into a collar of K; backward trajectories approach C
    CellSet b_cand = *bounded;
    b_cand.subtract(c_wide);
    b_cand.subtract(k.cells.dilate(opts.collar + 2));
    std::vector<std::uint64_t> b_samples = spread_sample(b_cand, opts.attraction_samples);
    bool repels = !b_samples.empty();
    for (std::uint64_t cell : b_samples) {
        grid->cell_center(cell, x0.data());
        Trajectory fw = integrate(flow, lambda, x0, opts.attraction_horizon, policy, iopts);
        bool reached_k = false;
        for (const auto& s : fw.samples) {
            std::uint64_t loc = grid->locate(s.state.data());
            if (loc != UINT64_MAX && k_near.contains(loc)) {
                reached_k = true;
                break;
            }
        }
        Trajectory bw = integrate(flow, lambda, x0, -opts.attraction_horizon, policy, iopts);
        bool approached_c = false;
        for (const auto& s : bw.samples) {
            std::uint64_t loc = grid->locate(s.state.data());
            if (loc != UINT64_MAX && c_near.contains(loc)) {
                approached_c = true;
                break;
            }
        }
        if (fw.escaped || bw.escaped || !reached_k || !approached_c) repels = false;
    }
    sig.repels_bounded = repels;
    return sig;
}

namespace {

PolarityWitness make_witness(const ParametrizedFlow& flow, double lambda, double level,
                             const CellSet& c_cells, const CellSet& k_cells, GridPtr grid,
                             const EscapePolicy& policy, const AnalysisOptions& opts) {
    PolarityWitness w;
    w.lambda = lambda;
    w.level = level;
    if (c_cells.empty() || max_center_norm(c_cells) <= level) return w;

    // candidate start: bounded-side cell adjacent to C with the largest norm
    CellSet complement = CellSet::full(grid);
    complement.subtract(c_cells);
    std::vector<CellSet> comps = components(complement);
    const CellSet* bounded = nullptr;
    for (const CellSet& comp : comps)
        if (comp.intersects(k_cells) && comp.grid_edge_cells().empty()) bounded = &comp;
    if (!bounded) return w;
    CellSet cand = c_cells.dilate(1);
    cand.subtract(c_cells);
    cand.intersect(*bounded);
    if (cand.empty()) return w;
    std::uint64_t best = UINT64_MAX;
    double best_norm = -1.0;
    const int n = grid->dim();
    std::vector<double> x(n);
    cand.for_each([&](std::uint64_t cell) {
        grid->cell_center(cell, x.data());
        double nn = 0;
        for (int a = 0; a < n; ++a) nn += x[a] * x[a];
        if (nn > best_norm) {
            best_norm = nn;
            best = cell;
        }
    });
    grid->cell_center(best, x.data());
    w.start = x;

    IntegrateOptions iopts;
    iopts.tol = opts.map.tol;
    Trajectory bw = integrate(flow, lambda, x, -opts.polarity_horizon, policy, iopts);
    if (bw.escaped) return w;
    for (const auto& s : bw.samples)
        if (!state_in_box(grid->box(), s.state)) return w; // not a bounded tail
    // samples ascend from the most negative time; the tail beyond t_lambda
    // must stay above the level
    auto norm_of = [&](const std::vector<double>& st) {
        double nn = 0;
        for (double v : st) nn += v * v;
        return std::sqrt(nn);
    };
    if (norm_of(bw.samples.front().state) <= level) return w;
    double t_lambda = 0.0;
    double tail_min = norm_of(bw.samples.front().state);
    for (const auto& s : bw.samples) {
        if (norm_of(s.state) <= level) {
            t_lambda = s.t;
            break;
        }
        tail_min = std::min(tail_min, norm_of(s.state));
    }
    w.t_lambda = t_lambda;
    w.backward_min_norm = tail_min;

    Trajectory fw = integrate(flow, lambda, x, opts.polarity_horizon, policy, iopts);
    w.forward_bounded = !fw.escaped;
    for (const auto& s : fw.samples)
        if (!state_in_box(grid->box(), s.state)) w.forward_bounded = false;
    w.valid = w.forward_bounded && tail_min > level;
    return w;
}

PolarityResult assemble_polarity(const std::vector<double>& levels,
                                 const std::vector<double>& lambdas_sorted,
                                 const std::map<std::pair<double, double>, PolarityWitness>& table) {
    PolarityResult res;
    res.polar = !levels.empty() && !lambdas_sorted.empty();
    for (double level : levels) {
        PolarityLevel pl;
        pl.level = level;
        for (double lam : lambdas_sorted) {
            auto it = table.find({lam, level});
            if (it != table.end()) pl.witnesses.push_back(it->second);
        }
        // largest lambda such that every grid lambda below it has a witness
        for (double lam : lambdas_sorted) {
            auto it = table.find({lam, level});
            if (it == table.end() || !it->second.valid) break;
            pl.lambda_hat = lam;
        }
        if (!pl.lambda_hat) res.polar = false;
        res.levels.push_back(std::move(pl));
    }
    return res;
}

} // namespace

PolarityResult polarity_test(const ParametrizedFlow& flow,
                             const std::vector<double>& lambda_grid,
                             const std::vector<double>& levels, GridPtr grid,
                             const AnalysisOptions& opts) {
    EscapePolicy policy = resolve_policy(grid, opts);
    for (double level : levels)
        if (level >= grid->box().circumradius())
            throw ConfigError("polarity threshold exceeds the grid box circumradius");

    // K per lambda via the configured seed, then separator candidates
    std::map<std::pair<double, double>, PolarityWitness> table;
    ContinuationState st;
    CellSet seed_cells(grid);
    if (opts.seed == AnalysisOptions::Seed::Box) {
        if (!opts.seed_box)
            throw ConfigError("seed box required for box seeding");
        seed_cells = CellSet::cover_box(grid, *opts.seed_box);
    }
    for (double lambda : lambda_grid) {
        MultivaluedMap fwd = full_map(flow, lambda, grid, policy, opts);
        CellSet k_cells(grid);
        if (opts.seed == AnalysisOptions::Seed::Global) {
            k_cells = invariant_part(fwd, CellSet::full(grid));
        } else {
            StepOutcome so =
                continuation_step(flow, lambda, fwd, grid, policy, opts, st, &seed_cells);
            k_cells = so.k;
        }
        SeparatorInternal si =
            separator_cells(flow, lambda, k_cells, grid, policy, opts, &fwd);
        for (double level : levels)
            table[{lambda, level}] =
                make_witness(flow, lambda, level, si.cells, k_cells, grid, policy, opts);
    }
    std::vector<double> lam_sorted = lambda_grid;
    std::sort(lam_sorted.begin(), lam_sorted.end());
    return assemble_polarity(levels, lam_sorted, table);
}

FamilyVerdict analyze_family(const ParametrizedFlow& flow,
                             const std::vector<double>& lambda_grid, GridPtr grid,
                             const AnalysisOptions& opts,
                             const std::vector<double>& polarity_levels) {
    FamilyVerdict fam;
    if (lambda_grid.empty()) return fam;
    EscapePolicy policy = resolve_policy(grid, opts);
    CellSet full = CellSet::full(grid);

    ContinuationState st;
    CellSet seed_cells(grid);
    if (opts.seed == AnalysisOptions::Seed::Box) {
        if (!opts.seed_box)
            throw ConfigError("seed box required for box seeding");
        seed_cells = CellSet::cover_box(grid, *opts.seed_box);
    }

    std::map<std::pair<double, double>, PolarityWitness> pol_table;
    std::map<double, LambdaReport> reports;
    std::optional<ConleyIndex> seed_index;
    fam.continuation_index_constant = true;
    fam.uniform_trapping = true;
    fam.global_continuation_ok = true;
    fam.witness_box = grid->box();

    for (double lambda : lambda_grid) {
        LambdaReport rep;
        rep.lambda = lambda;
        MultivaluedMap fwd = full_map(flow, lambda, grid, policy, opts);
        rep.trapping = fwd.escaping.empty();
        if (!rep.trapping) {
            fam.uniform_trapping = false;
            rep.notes.push_back("grid box is not trapping at this lambda");
        }
        CellSet ambient = invariant_part(fwd, full);
        rep.ambient_cells = ambient.count();
        if (rep.trapping && !ambient.empty()) {
            double tau_rev = reverse_tau_for(flow, lambda, ambient, grid, opts.map.tau);
            MultivaluedMap rev_a =
                restricted_map(reverse_flow(flow), lambda, grid, policy, opts,
                               ambient.dilate(4), tau_rev, opts.map.tol);
            rep.ambient_index = conley_index_trapping(fwd, rev_a, ambient);
        }

        // continuation step for K
        CellSet k_cells(grid);
        if (!fam.continuation_broken_at) {
            try {
                CellSet seed_for_step =
                    opts.seed == AnalysisOptions::Seed::Global ? ambient : seed_cells;
                StepOutcome so = continuation_step(flow, lambda, fwd, grid, policy, opts,
                                                   st, &seed_for_step);
                k_cells = so.k;
                if (so.refined) rep.notes.push_back("isolation verified after 2x refinement");
            } catch (const ContinuationBroken& e) {
                fam.continuation_broken_at = lambda;
                fam.global_continuation_ok = false;
                rep.notes.push_back(e.what());
            } catch (const NotIsolated& e) {
                fam.continuation_broken_at = lambda;
                fam.global_continuation_ok = false;
                rep.notes.push_back(e.what());
            }
        }
        rep.k_cells = k_cells.count();
        rep.k_set = k_cells;
        if (!k_cells.empty()) {
            rep.k_is_global = (k_cells == ambient);
            if (!rep.k_is_global && !fam.globality_lost_at) {
                fam.globality_lost_at = lambda;
                fam.global_continuation_ok = false;
            }
            rep.k_index = index_for(flow, lambda, fwd, grid, policy, opts, k_cells,
                                    rep.k_is_global, rep.trapping);
            if (!seed_index)
                seed_index = rep.k_index;
            else if (!index_equal(*seed_index, *rep.k_index))
                fam.continuation_index_constant = false;

            // separating set
            SeparatorInternal si =
                separator_cells(flow, lambda, k_cells, grid, policy, opts, &fwd);
            rep.c_cells = si.cells.count();
            rep.c_set = si.cells;
            rep.separator_tau = si.tau;
            if (!si.cells.empty()) {
                rep.c_diameter = diameter(si.cells);
                IsolationResult iso =
                    is_isolating(*si.fwd, si.index_cells.dilate(opts.collar));
                rep.c_isolated = iso.isolating;
                try {
                    rep.c_index = conley_index(*si.fwd, *si.rev, si.index_cells);
                } catch (const Error& e) {
                    rep.notes.push_back(std::string("separator index failed: ") + e.what());
                }
                InvariantSetRecord c_rec;
                c_rec.lambda = lambda;
                c_rec.role = SetRole::SeparatingSet;
                c_rec.cells = si.cells;
                InvariantSetRecord k_rec;
                k_rec.lambda = lambda;
                k_rec.role = SetRole::ContinuedAttractor;
                k_rec.cells = k_cells;
                rep.signature =
                    coercivity_signature(flow, lambda, c_rec, k_rec, grid, opts);
            }
            // exact sequence of the attractor-repeller pair (K, C) inside A
            if (rep.k_index && rep.ambient_index) {
                GradedGroup c_coh; // zero when C is empty or its index failed
                if (rep.c_index) c_coh = rep.c_index->forward.cohomological;
                rep.exact_sequence =
                    check_exact_sequence(rep.k_index->forward.cohomological,
                                         rep.ambient_index->forward.cohomological, c_coh);
            }
            for (double level : polarity_levels)
                pol_table[{lambda, level}] = make_witness(flow, lambda, level, si.cells,
                                                          k_cells, grid, policy, opts);
        }
        reports[lambda] = std::move(rep);
    }

    // fast-recurrence heuristic: the map may miss recurrences faster than tau
    {
        const int n = grid->dim();
        std::vector<double> x(n), f(n);
        double maxv = 0;
        CellSet probe = CellSet::full(grid);
        for (std::uint64_t cell : spread_sample(probe, 64)) {
            grid->cell_center(cell, x.data());
            flow.eval(x.data(), lambda_grid.front(), f.data());
            double nn = 0;
            for (int a = 0; a < n; ++a) nn += f[a] * f[a];
            maxv = std::max(maxv, std::sqrt(nn));
        }
        double min_extent = grid->box().extent(0);
        for (int a = 1; a < n; ++a) min_extent = std::min(min_extent, grid->box().extent(a));
        if (opts.map.tau * maxv > 0.5 * min_extent)
            fam.notes.push_back(
                "tau is large for the sampled velocities; recurrences faster than tau "
                "may be invisible to the combinatorial map");
    }

    fam.lambda_grid = lambda_grid;
    std::sort(fam.lambda_grid.begin(), fam.lambda_grid.end());
    for (double lam : fam.lambda_grid) fam.per_lambda.push_back(std::move(reports[lam]));

    fam.polarity = assemble_polarity(polarity_levels, fam.lambda_grid, pol_table);
    fam.polar = fam.polarity.polar;
    fam.uniform_dissipative = fam.uniform_trapping && fam.global_continuation_ok &&
                              !fam.continuation_broken_at;

    if (fam.polar) {
        if (!fam.uniform_trapping)
            fam.failure_mode = "trapping fails for some lambda";
        else if (fam.globality_lost_at)
            fam.failure_mode = "continuation of the global attractors breaks: the "
                               "continued set stops being the ambient invariant set at "
                               "lambda=" + std::to_string(*fam.globality_lost_at);
        else if (fam.continuation_broken_at)
            fam.failure_mode = "continuation breaks at lambda=" +
                               std::to_string(*fam.continuation_broken_at);
        else
            fam.failure_mode = "none detected (inconsistent with polarity)";
    }
    if (fam.uniform_dissipative && fam.polar)
        fam.notes.push_back("warning: simultaneously uniformly dissipative and polar; "
                            "this violates the mutual-exclusion property");

    // coercive: every lambda with a non-global continued attractor carries a
    // separating set with the full signature
    if (!fam.polar) {
        fam.coercive = false;
        fam.coercive_note = "not polar; separating-set analysis not applicable";
    } else {
        bool all = true;
        bool any = false;
        for (const LambdaReport& rep : fam.per_lambda) {
            if (rep.k_cells == 0 || rep.k_is_global) continue;
            any = true;
            if (!(rep.c_cells > 0 && rep.signature && rep.signature->all_pass())) all = false;
        }
        fam.coercive = any && all;
        fam.coercive_note = fam.coercive
                                ? "every non-global lambda carries a sphere-like separating set"
                                : "some non-global lambda lacks a valid separating-set signature";
    }
    return fam;
}

} // namespace cubicon
