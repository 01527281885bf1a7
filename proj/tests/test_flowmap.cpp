#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cubicon/dynamics.hpp"
#include "cubicon/errors.hpp"
#include "cubicon/flowmap.hpp"

#include <cmath>
#include <random>

using namespace cubicon;

namespace {

GridPtr grid2(double lo, double hi, int div) {
    Box b;
    b.bounds = {{lo, hi}, {lo, hi}};
    return make_grid(b, {div, div});
}

ParametrizedFlow zero_flow() {
    ParametrizedFlow f;
    f.dim = 2;
    f.name = "zero";
    f.eval = [](const double*, double, double* out) { out[0] = out[1] = 0.0; };
    return f;
}

ParametrizedFlow saddle_flow() {
    ParametrizedFlow f;
    f.dim = 2;
    f.name = "saddle";
    f.eval = [](const double* x, double, double* out) {
        out[0] = x[0];
        out[1] = -x[1];
    };
    return f;
}

double cell_radius(const CubicalGrid& g, std::uint64_t i) {
    double c[2];
    g.cell_center(i, c);
    return std::hypot(c[0], c[1]);
}

// independent oracle for the invariant part: nodes on bi-infinite paths
std::vector<char> brute_inv(int n, const std::vector<std::vector<std::uint32_t>>& succ,
                            const std::vector<char>& esc) {
    auto closure = [&](int from) {
        std::vector<char> seen(n, 0);
        std::vector<int> st;
        for (std::uint32_t t : succ[from])
            if (!esc[t] && !seen[t]) {
                seen[t] = 1;
                st.push_back(t);
            }
        while (!st.empty()) {
            int v = st.back();
            st.pop_back();
            for (std::uint32_t t : succ[v])
                if (!esc[t] && !seen[t]) {
                    seen[t] = 1;
                    st.push_back(t);
                }
        }
        return seen;
    };
    std::vector<std::vector<char>> plus(n);
    for (int i = 0; i < n; ++i)
        plus[i] = esc[i] ? std::vector<char>(n, 0) : closure(i);
    std::vector<char> cyc(n, 0), out(n, 0);
    for (int i = 0; i < n; ++i)
        if (!esc[i] && plus[i][i]) cyc[i] = 1;
    for (int i = 0; i < n; ++i) {
        if (esc[i]) continue;
        bool f = cyc[i], b = cyc[i];
        for (int j = 0; j < n && (!f || !b); ++j) {
            if (!cyc[j]) continue;
            if (plus[i][j]) f = true;
            if (plus[j][i]) b = true;
        }
        out[i] = f && b;
    }
    return out;
}

} // namespace

TEST_CASE("outer approximation of the zero field: identity plus bloat") {
    GridPtr g = grid2(0, 8, 8);
    EscapePolicy policy{100.0};
    OuterApproxOptions o;
    o.tau = 0.5;
    o.bloat = 1;
    MultivaluedMap map = outer_approximation(zero_flow(), 0.0, g, policy, o);
    int c[2];
    for (std::uint64_t i = 0; i < g->cell_count(); ++i) {
        g->cell_coords(i, c);
        bool interior = c[0] > 1 && c[0] < 6 && c[1] > 1 && c[1] < 6;
        if (!interior) continue; // edge cells have collars sticking out
        // image contains the cell and its bloat collar, and stays within the
        // quantization-plus-bloat envelope
        CellSet self(g);
        self.insert(i);
        CellSet lower = self.dilate(o.bloat);
        CellSet upper = self.dilate(o.bloat + 1);
        auto [b, e] = map.image(i);
        CellSet img(g);
        for (auto p = b; p != e; ++p) img.insert(*p);
        CHECK(lower.is_subset_of(img));
        CHECK(img.is_subset_of(upper));
        CHECK(!map.is_escaping(i));
    }
    // corner samples of the corner cell sit on the box edge but inside
    CHECK(map.in_domain(0));
}

TEST_CASE("outer approximation respects the inward radial drift of eqn1") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-3, 3, 64);
    EscapePolicy policy{10.0};
    OuterApproxOptions o;
    o.tau = 0.5;
    o.bloat = 0; // measure the raw endpoints
    MultivaluedMap map = outer_approximation(f, 0.5, g, policy, o);

    const CubicalGrid& grid = *g;
    const double h = grid.cell_side(0);
    const double quant = h * std::sqrt(0.5); // center-of-cell quantization
    int checked = 0;
    for (std::uint64_t i = 0; i < grid.cell_count(); ++i) {
        double r = cell_radius(grid, i);
        if (r < 0.3 || r > 2.9) continue;
        auto [b, e] = map.image(i);
        if (b == e) continue;
        double worst = 0;
        for (auto p = b; p != e; ++p) worst = std::max(worst, cell_radius(grid, *p));
        // dr/dt = -r (1 - lambda r)^2 <= 0 everywhere: image radii never
        // exceed the source radius beyond quantization...
        CHECK(worst < r + 2 * quant);
        // ...and strictly decrease where the drift dominates the cell size
        double s = 1.0 - 0.5 * r;
        double drift = 0.5 * r * s * s; // |dr/dt| * tau at the cell center
        if (drift > 2.5 * quant) {
            CHECK(worst < r);
            ++checked;
        }
    }
    CHECK(checked > 300);
}

TEST_CASE("invariant part matches brute force on 1000 random maps") {
    std::mt19937 rng(13371u);
    for (int rep = 0; rep < 1000; ++rep) {
        int nx = 2 + static_cast<int>(rng() % 4);
        int ny = 2 + static_cast<int>(rng() % 4);
        Box b;
        b.bounds = {{0.0, double(nx)}, {0.0, double(ny)}};
        GridPtr g = make_grid(b, {nx, ny});
        int n = nx * ny;
        std::vector<std::vector<std::uint32_t>> images(n);
        std::vector<char> esc(n, 0);
        CellSet escaping(g);
        for (int c = 0; c < n; ++c) {
            int deg = static_cast<int>(rng() % 4);
            for (int d = 0; d < deg; ++d)
                images[c].push_back(static_cast<std::uint32_t>(rng() % n));
            if (rng() % 8 == 0) {
                esc[c] = 1;
                escaping.insert(c);
            }
        }
        MultivaluedMap map = synthetic_map(g, images, escaping);
        CellSet inv = invariant_part(map, CellSet::full(g));
        std::vector<char> oracle = brute_inv(n, images, esc);
        for (int c = 0; c < n; ++c)
            REQUIRE(inv.contains(c) == static_cast<bool>(oracle[c]));

        // restriction to a subset S behaves like deleting the complement
        CellSet s(g);
        for (int c = 0; c < n; ++c)
            if (rng() % 2) s.insert(c);
        CellSet inv_s = invariant_part(map, s);
        std::vector<char> esc2 = esc;
        std::vector<std::vector<std::uint32_t>> img2(n);
        for (int c = 0; c < n; ++c) {
            if (!s.contains(c)) {
                esc2[c] = 1;
                continue;
            }
            for (std::uint32_t t : images[c])
                if (s.contains(t)) img2[c].push_back(t); // dropped targets only shrink images
        }
        // cells mapping outside S keep their in-S images; bi-infinite
        // itineraries inside S are what invariant_part reports
        std::vector<char> oracle_s = brute_inv(n, img2, esc2);
        for (int c = 0; c < n; ++c)
            REQUIRE(inv_s.contains(c) == static_cast<bool>(oracle_s[c]));
    }
}

TEST_CASE("invariant part properties: idempotent, monotone, shrinking") {
    std::mt19937 rng(5150u);
    GridPtr g = grid2(0, 5, 5);
    int n = 25;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<std::vector<std::uint32_t>> images(n);
        for (int c = 0; c < n; ++c) {
            int deg = static_cast<int>(rng() % 4);
            for (int d = 0; d < deg; ++d)
                images[c].push_back(static_cast<std::uint32_t>(rng() % n));
        }
        MultivaluedMap map = synthetic_map(g, images, CellSet(g));
        CellSet s(g), t(g);
        for (int c = 0; c < n; ++c) {
            if (rng() % 2) s.insert(c);
            if (rng() % 2) t.insert(c);
        }
        t.unite(s); // s subset of t
        CellSet inv_s = invariant_part(map, s);
        CellSet inv_t = invariant_part(map, t);
        CHECK(inv_s.is_subset_of(s));
        CHECK(inv_s.is_subset_of(inv_t));
        CHECK(invariant_part(map, inv_s) == inv_s);
    }
}

TEST_CASE("bloat nesting: larger bloat gives larger images and invariant parts") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-3, 3, 48);
    EscapePolicy policy{10.0};
    OuterApproxOptions o1, o2;
    o1.tau = o2.tau = 0.5;
    o1.bloat = 0;
    o2.bloat = 1;
    MultivaluedMap m1 = outer_approximation(f, 0.5, g, policy, o1);
    MultivaluedMap m2 = outer_approximation(f, 0.5, g, policy, o2);
    for (std::uint64_t c = 0; c < g->cell_count(); ++c) {
        auto [b1, e1] = m1.image(c);
        auto [b2, e2] = m2.image(c);
        for (auto p = b1; p != e1; ++p) {
            bool found = false;
            for (auto q = b2; q != e2; ++q)
                if (*q == *p) found = true;
            REQUIRE(found);
        }
    }
    CellSet full = CellSet::full(g);
    CHECK(invariant_part(m1, full).is_subset_of(invariant_part(m2, full)));
}

TEST_CASE("outer approximation is independent of the worker count") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-3, 3, 32);
    EscapePolicy policy{10.0};
    OuterApproxOptions o;
    o.tau = 0.5;
    o.threads = 1;
    MultivaluedMap m1 = outer_approximation(f, 0.25, g, policy, o);
    o.threads = 3;
    MultivaluedMap m3 = outer_approximation(f, 0.25, g, policy, o);
    CHECK(m1.targets == m3.targets);
    CHECK(m1.offsets == m3.offsets);
    CHECK(m1.escaping == m3.escaping);
}

TEST_CASE("is_isolating on eqn1 fixtures") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-3, 3, 64);
    EscapePolicy policy{10.0};
    OuterApproxOptions o;
    o.tau = 0.5;
    MultivaluedMap map = outer_approximation(f, 0.0, g, policy, o);

    // the full grid isolates the global attractor at lambda=0
    CellSet full = CellSet::full(g);
    IsolationResult iso = is_isolating(map, full);
    CHECK(iso.isolating);
    CHECK(!iso.invariant.empty());
    // invariant part concentrates at the origin
    double far = 0;
    iso.invariant.for_each([&](std::uint64_t i) {
        far = std::max(far, cell_radius(*g, i));
    });
    CHECK(far < 0.5);

    // empty set is trivially isolating
    IsolationResult empty_iso = is_isolating(map, CellSet(g));
    CHECK(empty_iso.isolating);
    CHECK(empty_iso.invariant.empty());
}

TEST_CASE("thin ring neighborhoods around the invariant circle do not isolate") {
    // Width-1 ring around r=2 at 64^2 and its children at 128^2.  The circle
    // itself is invariant and every cell of a thin band is boundary, so the
    // invariant part touches the boundary layer; refining cannot change that
    // because the circle stays inside the refined band.  Both outcomes are
    // frozen from computation.
    ParametrizedFlow f = builtin_eqn1();
    EscapePolicy policy{10.0};
    OuterApproxOptions o;
    o.tau = 0.5;

    GridPtr g = grid2(-3, 3, 64);
    MultivaluedMap map = outer_approximation(f, 0.5, g, policy, o);
    CellSet ring(g);
    double h = g->cell_side(0);
    for (std::uint64_t i = 0; i < g->cell_count(); ++i)
        if (std::abs(cell_radius(*g, i) - 2.0) <= h / 2) ring.insert(i);
    REQUIRE(!ring.empty());
    IsolationResult coarse = is_isolating(map, ring);
    CHECK(!coarse.isolating);
    CHECK(!coarse.invariant.empty());

    CellSet ring2 = ring.refine2();
    GridPtr g2 = ring2.grid();
    MultivaluedMap map2 = outer_approximation(f, 0.5, g2, policy, o);
    IsolationResult fine = is_isolating(map2, ring2);
    CHECK(!fine.isolating);
    CHECK(!fine.invariant.empty());
}

TEST_CASE("index pair for an attracting fixed point has an empty exit set") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-3, 3, 64);
    EscapePolicy policy{10.0};
    OuterApproxOptions o;
    o.tau = 0.5;
    MultivaluedMap map = outer_approximation(f, 0.0, g, policy, o);
    CellSet full = CellSet::full(g);
    CellSet k = invariant_part(map, full);
    IndexPair p = index_pair(map, k);
    CHECK(p.exit.empty());
    CHECK(k.is_subset_of(p.n));
}

TEST_CASE("index pair of the separating ring: exit on the inner side") {
    ParametrizedFlow f = builtin_eqn1();
    GridPtr g = grid2(-3, 3, 96);
    EscapePolicy policy{10.0};
    OuterApproxOptions o;
    o.tau = 1.0;
    MultivaluedMap map = outer_approximation(f, 0.5, g, policy, o);
    // separator candidates: everything away from the origin
    CellSet region = CellSet::full(g);
    CellSet origin_collar(g);
    double p0[2] = {0.0, 0.0};
    origin_collar.insert(g->locate(p0));
    region.subtract(origin_collar.dilate(4));
    CellSet ring = invariant_part(map, region);
    REQUIRE(!ring.empty());

    IndexPair pair = index_pair(map, ring);
    REQUIRE(!pair.exit.empty());
    // exit cells hug the inner edge: their radius is below the ring mean
    double ring_mean = 0;
    std::uint64_t cnt = 0;
    ring.for_each([&](std::uint64_t i) {
        ring_mean += cell_radius(*g, i);
        ++cnt;
    });
    ring_mean /= static_cast<double>(cnt);
    pair.exit.for_each(
        [&](std::uint64_t i) { CHECK(cell_radius(*g, i) < ring_mean); });

    // positive invariance: cells of N minus exit map into N
    CellSet inner = pair.n;
    inner.subtract(pair.exit);
    inner.for_each([&](std::uint64_t c) {
        auto [b, e] = map.image(c);
        for (auto q = b; q != e; ++q) REQUIRE(pair.n.contains(*q));
    });

    // reversal duality: under the reverse flow the exit moves to the outer side
    MultivaluedMap rmap = outer_approximation(reverse_flow(f), 0.5, g, policy, o);
    CellSet rring = invariant_part(rmap, region);
    REQUIRE(!rring.empty());
    IndexPair rpair = index_pair(rmap, rring);
    REQUIRE(!rpair.exit.empty());
    double rring_mean = 0;
    cnt = 0;
    rring.for_each([&](std::uint64_t i) {
        rring_mean += cell_radius(*g, i);
        ++cnt;
    });
    rring_mean /= static_cast<double>(cnt);
    rpair.exit.for_each(
        [&](std::uint64_t i) { CHECK(cell_radius(*g, i) > rring_mean); });
}

TEST_CASE("index pair of the saddle: exit strips left and right") {
    ParametrizedFlow f = saddle_flow();
    GridPtr g = grid2(-1, 1, 32);
    EscapePolicy policy{10.0};
    OuterApproxOptions o;
    o.tau = 0.3;
    MultivaluedMap map = outer_approximation(f, 0.0, g, policy, o);
    CellSet box(g);
    double p0[2] = {0.0, 0.0};
    box.insert(g->locate(p0));
    CellSet k = invariant_part(map, box.dilate(3));
    REQUIRE(!k.empty());
    IndexPair pair = index_pair(map, k);
    REQUIRE(!pair.exit.empty());
    double c[2];
    pair.exit.for_each([&](std::uint64_t i) {
        g->cell_center(i, c);
        CHECK(std::abs(c[0]) >= std::abs(c[1])); // exits along the unstable axis
    });
    // direct check: the image of each exit cell leaves N
    pair.exit.for_each([&](std::uint64_t i) {
        auto [b, e] = map.image(i);
        bool leaves = false;
        for (auto q = b; q != e; ++q)
            if (!pair.n.contains(*q)) leaves = true;
        CHECK(leaves);
    });
}

TEST_CASE("grid mismatch is rejected") {
    GridPtr a = grid2(0, 1, 4);
    GridPtr b = grid2(0, 1, 8);
    std::vector<std::vector<std::uint32_t>> images(16);
    MultivaluedMap map = synthetic_map(a, images, CellSet(a));
    CHECK_THROWS_AS(invariant_part(map, CellSet(b)), GridMismatch);
}
