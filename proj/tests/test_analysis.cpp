#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cubicon/analysis.hpp"
#include "cubicon/config.hpp"
#include "cubicon/errors.hpp"
#include "cubicon/report.hpp"

#include <cmath>

using namespace cubicon;

namespace {

GridPtr grid2(double lo, double hi, int div) {
    Box b;
    b.bounds = {{lo, hi}, {lo, hi}};
    return make_grid(b, {div, div});
}

AnalysisOptions eqn1_opts(int collar = 2) {
    AnalysisOptions o;
    o.map.tau = 0.5;
    o.map.samples_per_axis = 2;
    o.map.bloat = 1;
    o.map.tol = 1e-8;
    o.collar = collar;
    o.refine_separator = true;
    o.separator_max_tau = 32.0;
    o.separator_tau_factor = 4.0;
    o.separator_tol = 1e-7;
    o.attraction_samples = 40;
    o.attraction_horizon = 80.0;
    o.polarity_horizon = 60.0;
    o.seed = AnalysisOptions::Seed::Box;
    Box sb;
    sb.bounds = {{-0.4, 0.4}, {-0.4, 0.4}};
    o.seed_box = sb;
    return o;
}

ParametrizedFlow sink_family() {
    // frozen family: a linear sink for every lambda
    ParametrizedFlow f;
    f.dim = 2;
    f.name = "sink";
    f.eval = [](const double* x, double, double* out) {
        out[0] = -x[0];
        out[1] = -x[1];
    };
    return f;
}

} // namespace

TEST_CASE("find_global_attractor: eqn1 at lambda 0") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-3, 3, 96);
    AnalysisOptions o = eqn1_opts();
    GlobalAttractorResult res = find_global_attractor(f, 0.0, g, o);
    CHECK(res.isolated);
    CHECK(!res.record.cells.empty());
    // attractor concentrates at the origin
    CHECK(max_center_norm(res.record.cells) < 0.4);
    REQUIRE(res.record.index.has_value());
    const ConleyIndex& ci = *res.record.index;
    CHECK(ci.forward.cohomological.rank(0) == 1);
    CHECK(ci.forward.cohomological.rank(1) == 0);
    CHECK(ci.forward.cohomological.rank(2) == 0);
    CHECK(ci.duality_ok);
    // basin is the whole grid
    REQUIRE(res.record.basin.has_value());
    CHECK(res.record.basin->count() == g->cell_count());
}

TEST_CASE("find_global_attractor: linear sink on a box") {
    ParametrizedFlow f = sink_family();
    GridPtr g = grid2(-1, 1, 32);
    AnalysisOptions o = eqn1_opts();
    o.map.tau = 0.4;
    GlobalAttractorResult res = find_global_attractor(f, 0.0, g, o);
    // the invariant part smears over a ball of a few cells around the sink
    CHECK(max_center_norm(res.record.cells) < 0.5);
    CHECK(res.record.index->forward.cohomological.rank(0) == 1);
}

TEST_CASE("find_global_attractor reports non-trapping boxes") {
    // outward field: every boundary cell escapes
    ParametrizedFlow f;
    f.dim = 2;
    f.eval = [](const double* x, double, double* out) {
        out[0] = x[0];
        out[1] = x[1];
    };
    GridPtr g = grid2(-1, 1, 16);
    AnalysisOptions o = eqn1_opts();
    o.map.tau = 0.5;
    CHECK_THROWS_AS(find_global_attractor(f, 0.0, g, o), NotTrapping);
}

TEST_CASE("extract_separator: empty at lambda 0, ring for positive lambda") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-3, 3, 96);
    AnalysisOptions o = eqn1_opts();

    MultivaluedMap fwd0 = outer_approximation(f, 0.0, g, EscapePolicy{2.0 * g->box().circumradius()}, o.map);
    CellSet k0 = invariant_part(fwd0, CellSet::full(g));
    InvariantSetRecord k0rec;
    k0rec.lambda = 0.0;
    k0rec.cells = k0;
    SeparatorResult c0 = extract_separator(f, 0.0, k0rec, g, o);
    CHECK(c0.record.cells.empty());

    InvariantSetRecord k1 = k0rec; // origin cells isolate for every lambda
    k1.lambda = 0.5;
    SeparatorResult c1 = extract_separator(f, 0.5, k1, g, o);
    REQUIRE(!c1.record.cells.empty());
    CHECK(c1.isolated);
    CHECK(c1.stages > 0);
    // the ring hugs radius 2: diameter close to 4
    REQUIRE(c1.record.diameter.has_value());
    CHECK(*c1.record.diameter > 3.7);
    CHECK(*c1.record.diameter < 4.5);
    // trivial index in every degree, both directions
    REQUIRE(c1.record.index.has_value());
    CHECK(c1.record.index->trivial());
    CHECK(c1.record.index->duality_ok);
}

TEST_CASE("coercivity signature of the eqn1 ring") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-3, 3, 96);
    AnalysisOptions o = eqn1_opts();
    MultivaluedMap fwd = outer_approximation(f, 0.5, g, EscapePolicy{2.0 * g->box().circumradius()}, o.map);
    // K = origin cells
    CellSet seed = CellSet::cover_box(g, *o.seed_box);
    CellSet k = invariant_part(fwd, seed.dilate(2));
    REQUIRE(!k.empty());
    InvariantSetRecord krec;
    krec.lambda = 0.5;
    krec.cells = k;
    SeparatorResult sep = extract_separator(f, 0.5, krec, g, o);
    REQUIRE(!sep.record.cells.empty());

    SignatureResult sig = coercivity_signature(f, 0.5, sep.record, krec, g, o);
    CHECK(sig.separates);
    CHECK(sig.complement_components == 2);
    CHECK(sig.k_in_bounded);
    CHECK(sig.sphere_homology);
    CHECK(sig.attracts_unbounded);
    CHECK(sig.repels_bounded);
    CHECK(sig.entry_time_bound > 0.0);
    CHECK(sig.all_pass());
}

TEST_CASE("signature rejects non-spherical separators") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-3, 3, 48);
    AnalysisOptions o = eqn1_opts();
    // artificial C: two disjoint rings (three complement components)
    CellSet c(g);
    auto put_ring = [&](int cx, int cy) {
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if (dx || dy) c.insert((cy + dy) * 48 + (cx + dx));
    };
    put_ring(12, 24);
    put_ring(33, 24);
    InvariantSetRecord crec, krec;
    crec.lambda = 0.5;
    crec.cells = c;
    double p0[2] = {0.0, 0.0};
    krec.cells = CellSet(g);
    krec.cells.insert(g->locate(p0));
    SignatureResult sig = coercivity_signature(f, 0.5, crec, krec, g, o);
    CHECK(!sig.separates);
    CHECK(sig.complement_components == 3);
    CHECK(!sig.all_pass());

    // figure-eight separator (two rings glued along a shared column of
    // cells): H1 has rank 2, which fails the sphere test
    CellSet fig(g);
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
            if (dx || dy) {
                fig.insert((24 + dy) * 48 + (20 + dx));
                fig.insert((24 + dy) * 48 + (22 + dx));
            }
    InvariantSetRecord frec = crec;
    frec.cells = fig;
    SignatureResult sig2 = coercivity_signature(f, 0.5, frec, krec, g, o);
    CHECK(!sig2.sphere_homology);
    CHECK(sig2.c_homology.rank(1) == 2);
}

TEST_CASE("track_continuation: eqn1 seed stays the origin with constant index") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-3, 3, 96);
    AnalysisOptions o = eqn1_opts();
    MultivaluedMap fwd = outer_approximation(f, 0.5, g, EscapePolicy{2.0 * g->box().circumradius()}, o.map);
    CellSet seed = invariant_part(fwd, CellSet::cover_box(g, *o.seed_box).dilate(2));
    InvariantSetRecord seed_rec;
    seed_rec.lambda = 0.5;
    seed_rec.cells = seed;

    ContinuationResult res =
        track_continuation(f, {0.5, 0.375, 0.25}, seed_rec, g, o);
    CHECK(res.completed);
    CHECK(res.index_constant);
    REQUIRE(res.steps.size() == 3);
    for (const ContinuationStep& s : res.steps) {
        CHECK(max_center_norm(s.cells) < 0.55);
        CHECK(s.index.forward.cohomological.rank(0) == 1);
        CHECK(!s.is_global); // the origin is never the whole bounded dynamics
    }
    CHECK(res.globality_lost_at.has_value());
}

TEST_CASE("track_continuation: frozen family keeps the same cells") {
    ParametrizedFlow f = sink_family();
    GridPtr g = grid2(-1, 1, 32);
    AnalysisOptions o = eqn1_opts();
    o.map.tau = 0.4;
    o.seed_box->bounds = {{-0.2, 0.2}, {-0.2, 0.2}};
    MultivaluedMap fwd = outer_approximation(f, 0.0, g, EscapePolicy{2.0 * g->box().circumradius()}, o.map);
    CellSet seed = invariant_part(fwd, CellSet::cover_box(g, *o.seed_box).dilate(2));
    InvariantSetRecord seed_rec;
    seed_rec.cells = seed;
    ContinuationResult res = track_continuation(f, {0.0, 0.5, 1.0}, seed_rec, g, o);
    CHECK(res.completed);
    CHECK(res.index_constant);
    for (size_t i = 1; i < res.steps.size(); ++i)
        CHECK(res.steps[i].cells == res.steps[0].cells);
    CHECK(!res.globality_lost_at.has_value()); // the sink is global throughout
}

TEST_CASE("polarity: eqn1 has arbitrarily large bounded tails, the sink does not") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-10, 10, 128);
    AnalysisOptions o = eqn1_opts();
    o.seed_box->bounds = {{-1.0, 1.0}, {-1.0, 1.0}};
    // h = 0.156 here: tau must be long enough that the interior drift per
    // step beats the cell smear, or the origin ball merges with the ring;
    // at lambda = 0.5 even that is not enough, so the sweep starts at 0.3
    o.map.tau = 3.0;
    o.separator_max_tau = 48.0;
    PolarityResult pol =
        polarity_test(f, {0.3, 0.2, 0.1}, {1.5, 4.0, 8.0}, g, o);
    CHECK(pol.polar);
    REQUIRE(pol.levels.size() == 3);
    // L = 1.5: every ring (radius 3.33, 5, 10) clears it
    CHECK(pol.levels[0].lambda_hat == doctest::Approx(0.3));
    // L = 4: rings of radius 5 and 10
    CHECK(pol.levels[1].lambda_hat == doctest::Approx(0.2));
    // L = 8: only radius 10
    CHECK(pol.levels[2].lambda_hat == doctest::Approx(0.1));
    for (const PolarityWitness& w : pol.levels[2].witnesses)
        if (w.valid) {
            CHECK(w.backward_min_norm > 8.0);
            CHECK(w.forward_bounded);
        }

    // single lambda, level above the only ring: no witness
    PolarityResult none = polarity_test(f, {0.3}, {8.5}, g, o);
    CHECK(!none.polar);

    ParametrizedFlow s = sink_family();
    GridPtr gs = grid2(-2, 2, 32);
    AnalysisOptions os = eqn1_opts();
    os.map.tau = 0.4;
    os.seed_box->bounds = {{-0.3, 0.3}, {-0.3, 0.3}};
    PolarityResult psink = polarity_test(s, {0.5, 0.25}, {1.0}, gs, os);
    CHECK(!psink.polar);
}

TEST_CASE("analyze_family: eqn1 sweep verdicts") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-6, 6, 128);
    AnalysisOptions o = eqn1_opts();
    // at this resolution the default tau drifts less than one cell per step
    // inside the disk; a longer snapshot keeps the dynamics visible
    o.map.tau = 1.0;
    o.separator_max_tau = 64.0;
    FamilyVerdict fam = analyze_family(f, {0.5, 0.25}, g, o, {1.5, 3.0});

    REQUIRE(fam.per_lambda.size() == 2);
    CHECK(fam.lambda_grid == std::vector<double>{0.25, 0.5});
    // with tau=1 the corner orbits land inside the box at both lambdas
    CHECK(fam.per_lambda[1].trapping);
    CHECK(fam.uniform_trapping);
    // but the continued origin attractor loses globality immediately
    CHECK(fam.globality_lost_at.has_value());
    CHECK(!fam.uniform_dissipative);
    CHECK(fam.polar);
    CHECK(!fam.failure_mode.empty());
    CHECK(fam.coercive);
    // diameters grow as lambda drops: 2/lambda
    const LambdaReport& r025 = fam.per_lambda[0];
    const LambdaReport& r05 = fam.per_lambda[1];
    CHECK(r05.c_diameter == doctest::Approx(4.0).epsilon(0.2));
    CHECK(r025.c_diameter == doctest::Approx(8.0).epsilon(0.2));
    CHECK(r025.c_diameter > r05.c_diameter);
    // lower bound 2/lambda - 2h on the fixture
    double h = g->cell_side(0);
    CHECK(r05.c_diameter >= 4.0 - 2 * h);
    CHECK(r025.c_diameter >= 8.0 - 2 * h);
    // indices: K and A have point indices, C trivial
    REQUIRE(r05.k_index.has_value());
    CHECK(r05.k_index->forward.cohomological.rank(0) == 1);
    REQUIRE(r05.ambient_index.has_value());
    CHECK(r05.ambient_index->forward.cohomological.rank(0) == 1);
    REQUIRE(r05.c_index.has_value());
    CHECK(r05.c_index->trivial());
    REQUIRE(r05.exact_sequence.has_value());
    CHECK(r05.exact_sequence->pass);
    // mutual exclusion
    CHECK(!(fam.uniform_dissipative && fam.polar));
}

TEST_CASE("analyze_family: frozen sink family is uniformly dissipative, not polar") {
    ParametrizedFlow f = sink_family();
    GridPtr g = grid2(-2, 2, 48);
    AnalysisOptions o = eqn1_opts();
    o.map.tau = 0.4;
    o.seed = AnalysisOptions::Seed::Global;
    FamilyVerdict fam = analyze_family(f, {0.0, 0.5, 1.0}, g, o, {1.0});
    CHECK(fam.uniform_trapping);
    CHECK(fam.global_continuation_ok);
    CHECK(fam.uniform_dissipative);
    CHECK(!fam.polar);
    CHECK(!fam.coercive);
    CHECK(fam.continuation_index_constant);
    for (const LambdaReport& r : fam.per_lambda) {
        CHECK(r.k_is_global);
        CHECK(r.c_cells == 0);
    }
    CHECK(!(fam.uniform_dissipative && fam.polar));
}

TEST_CASE("empty lambda grid gives an empty verdict") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-3, 3, 32);
    FamilyVerdict fam = analyze_family(f, {}, g, eqn1_opts(), {});
    CHECK(fam.per_lambda.empty());
    CHECK(fam.lambda_grid.empty());
}

TEST_CASE("config parsing, defaults and validation messages") {
    RunConfig cfg = parse_config_text(
        "[system]\nbuiltin = eqn1\n"
        "[domain]\nlo = -6 -6\nhi = 6 6\ndivisions = 64 64\n"
        "[lambda]\nvalues = 0.5 0.25\n"
        "[analysis]\nseed = box\nseed_lo = -0.5 -0.5\nseed_hi = 0.5 0.5\n");
    validate_config(cfg);
    CHECK(cfg.tau == doctest::Approx(0.5));
    CHECK(cfg.separator_max_tau == doctest::Approx(64.0));
    CHECK(cfg.seed == "box");

    RunConfig bad = cfg;
    bad.lo = {6, -6};
    try {
        validate_config(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("axis 0") != std::string::npos);
    }

    CHECK_THROWS_AS(parse_config_text("[domain]\nbogus_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[domain\nlo = 1\n"), ConfigError);

    RunConfig lam = cfg;
    lam.lambda_values = {2.0};
    CHECK_THROWS_AS(validate_config(lam), ConfigError);
}

TEST_CASE("lambda grid generation from min/max/count") {
    RunConfig cfg = parse_config_text(
        "[system]\nbuiltin = lorenz\n"
        "[domain]\nlo = -40 -60 -10\nhi = 40 60 110\ndivisions = 16 16 16\n"
        "[lambda]\nmin = 0\nmax = 1\ncount = 5\n");
    validate_config(cfg);
    REQUIRE(cfg.lambda_values.size() == 5);
    CHECK(cfg.lambda_values.front() == doctest::Approx(0.0));
    CHECK(cfg.lambda_values.back() == doctest::Approx(1.0));
    CHECK(cfg.lambda_values[2] == doctest::Approx(0.5));
    CHECK(cfg.tau == doctest::Approx(0.1)); // lorenz default
    CHECK(cfg.seed == "global");
}

TEST_CASE("csv header and determinism of rendered outputs") {
    ParametrizedFlow f = builtin_eqn1();
    RunConfig cfg = parse_config_text(
        "[system]\nbuiltin = eqn1\n"
        "[domain]\nlo = -3 -3\nhi = 3 3\ndivisions = 48 48\n"
        "[lambda]\nvalues = 0.5 0.25\n"
        "[map]\ntau = 0.5\n"
        "[analysis]\nseed = box\nseed_lo = -0.4 -0.4\nseed_hi = 0.4 0.4\n"
        "separator_max_tau = 8\npolarity_levels = 1.5\nattraction_samples = 20\n");
    RunResult a = run_sweep(cfg);
    RunResult b = run_sweep(cfg);
    CHECK(a.verdict_json == b.verdict_json);
    CHECK(a.sweep_csv == b.sweep_csv);
    CHECK(a.diam_svg == b.diam_svg);
    CHECK(a.sweep_csv.rfind("lambda,k_cells,c_cells,diameter,index_trivial,separates,"
                            "sphere_homology,coercive,polar\n", 0) == 0);
    // analyze insists on exactly one lambda
    CHECK_THROWS_AS(run_analyze(cfg), ConfigError);
}
