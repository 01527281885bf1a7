#include "cubicon/selftest.hpp"
#include "cubicon/errors.hpp"
#include "cubicon/flowmap.hpp"
#include "cubicon/grid.hpp"
#include "cubicon/homology.hpp"

#include <random>

namespace cubicon {

namespace {

GridPtr unit_grid(int nx, int ny) {
    Box b;
    b.bounds = {{0.0, static_cast<double>(nx)}, {0.0, static_cast<double>(ny)}};
    return make_grid(b, {nx, ny});
}

GridPtr unit_grid3(int n) {
    Box b;
    b.bounds = {{0.0, 1.0 * n}, {0.0, 1.0 * n}, {0.0, 1.0 * n}};
    return make_grid(b, {n, n, n});
}

// Independent oracle: cells lying on bi-infinite itineraries, decided by
// explicit reachability over the directed graph (<= 25 nodes).
std::vector<char> brute_force_invariant(int n,
                                        const std::vector<std::vector<std::uint32_t>>& succ,
                                        const std::vector<char>& escaping) {
    auto reach_plus = [&](int from) {
        std::vector<char> seen(n, 0);
        std::vector<int> stack;
        for (std::uint32_t t : succ[from])
            if (!escaping[t] && !seen[t]) {
                seen[t] = 1;
                stack.push_back(t);
            }
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (std::uint32_t t : succ[v])
                if (!escaping[t] && !seen[t]) {
                    seen[t] = 1;
                    stack.push_back(static_cast<int>(t));
                }
        }
        return seen;
    };
    std::vector<std::vector<char>> plus(n);
    for (int i = 0; i < n; ++i)
        plus[i] = escaping[i] ? std::vector<char>(n, 0) : reach_plus(i);
    std::vector<char> on_cycle(n, 0);
    for (int i = 0; i < n; ++i)
        if (!escaping[i] && plus[i][i]) on_cycle[i] = 1;
    std::vector<char> result(n, 0);
    for (int i = 0; i < n; ++i) {
        if (escaping[i]) continue;
        bool fwd = on_cycle[i], bwd = on_cycle[i];
        for (int j = 0; j < n && (!fwd || !bwd); ++j) {
            if (!on_cycle[j]) continue;
            if (plus[i][j]) fwd = true;
            if (plus[j][i]) bwd = true;
        }
        result[i] = fwd && bwd;
    }
    return result;
}

bool suite_invariant_part(std::string& detail) {
    std::mt19937 rng(20240601u);
    for (int rep = 0; rep < 200; ++rep) {
        int nx = 2 + static_cast<int>(rng() % 4);
        int ny = 2 + static_cast<int>(rng() % 4);
        GridPtr g = unit_grid(nx, ny);
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
        std::vector<char> oracle = brute_force_invariant(n, images, esc);
        for (int c = 0; c < n; ++c)
            if (inv.contains(c) != static_cast<bool>(oracle[c])) {
                detail = "mismatch at case " + std::to_string(rep) + " cell " +
                         std::to_string(c);
                return false;
            }
    }
    return true;
}

bool suite_components(std::string& detail) {
    std::mt19937 rng(77001u);
    for (int rep = 0; rep < 200; ++rep) {
        int nx = 8, ny = 8;
        GridPtr g = unit_grid(nx, ny);
        CellSet s(g);
        for (int c = 0; c < nx * ny; ++c)
            if (rng() % 2) s.insert(c);
        std::vector<CellSet> comps = components(s);
        // independent flood fill
        std::vector<int> label(nx * ny, -1);
        int next = 0;
        for (int c = 0; c < nx * ny; ++c) {
            if (!s.contains(c) || label[c] >= 0) continue;
            std::vector<int> stack{c};
            label[c] = next;
            while (!stack.empty()) {
                int v = stack.back();
                stack.pop_back();
                int x = v % nx, y = v / nx;
                int nb[4] = {x > 0 ? v - 1 : -1, x + 1 < nx ? v + 1 : -1,
                             y > 0 ? v - nx : -1, y + 1 < ny ? v + nx : -1};
                for (int u : nb)
                    if (u >= 0 && s.contains(u) && label[u] < 0) {
                        label[u] = next;
                        stack.push_back(u);
                    }
            }
            ++next;
        }
        if (static_cast<int>(comps.size()) != next) {
            detail = "component count mismatch at case " + std::to_string(rep);
            return false;
        }
        for (int c = 0; c < nx * ny; ++c) {
            if (!s.contains(c)) continue;
            int found = -1;
            for (size_t k = 0; k < comps.size(); ++k)
                if (comps[k].contains(c)) found = static_cast<int>(k);
            // deterministic order: both labelings are by smallest first cell
            if (found != label[c]) {
                detail = "component label mismatch at case " + std::to_string(rep);
                return false;
            }
        }
    }
    return true;
}

CellSet block(GridPtr g, int x0, int x1, int y0, int y1) {
    CellSet s(g);
    int nx = g->divisions()[0];
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) s.insert(y * nx + x);
    return s;
}

bool expect_groups(const GradedGroup& got, const std::vector<int>& ranks,
                   std::string& detail, const std::string& name) {
    for (int k = 0; k < static_cast<int>(ranks.size()); ++k)
        if (got.rank(k) != ranks[k] || !got.torsion_at(k).empty()) {
            detail = name + ": got " + got.brief();
            return false;
        }
    if (got.top_nonzero() >= static_cast<int>(ranks.size())) {
        detail = name + ": extra groups, got " + got.brief();
        return false;
    }
    return true;
}

bool suite_homology(std::string& detail) {
    // single filled square: point homology
    {
        GridPtr g = unit_grid(4, 4);
        CellSet s(g);
        s.insert(5);
        if (!expect_groups(homology(s), {1}, detail, "square")) return false;
    }
    // 8-cell annulus (3x3 minus center): circle
    {
        GridPtr g = unit_grid(3, 3);
        CellSet s = CellSet::full(g);
        s.erase(4);
        if (!expect_groups(homology(s), {1, 1}, detail, "annulus")) return false;
    }
    // width-2 annulus rel inner ring: zero in all dimensions
    {
        GridPtr g = unit_grid(6, 6);
        CellSet n = block(g, 0, 5, 0, 5);
        n.subtract(block(g, 2, 3, 2, 3));
        CellSet inner = block(g, 1, 4, 1, 4);
        inner.subtract(block(g, 2, 3, 2, 3));
        IndexPair p;
        p.n = n;
        p.exit = inner;
        if (!expect_groups(relative_homology(p), {0}, detail, "annulus-rel-inner"))
            return false;
    }
    // 3x3 block rel left+right columns: interval rel endpoints
    {
        GridPtr g = unit_grid(3, 3);
        IndexPair p;
        p.n = CellSet::full(g);
        p.exit = block(g, 0, 0, 0, 2);
        p.exit.unite(block(g, 2, 2, 0, 2));
        if (!expect_groups(relative_homology(p), {0, 1}, detail, "saddle-pair"))
            return false;
    }
    // hollow 3x3x3 shell: 2-sphere
    {
        GridPtr g = unit_grid3(3);
        CellSet s = CellSet::full(g);
        s.erase(13); // center cube
        if (!expect_groups(homology(s), {1, 0, 1}, detail, "shell")) return false;
    }
    return true;
}

bool suite_exact_sequence(std::string& detail) {
    GradedGroup z0;
    z0.ranks = {1};
    z0.torsion = {{}};
    GradedGroup zero;
    GradedGroup z2;
    z2.ranks = {2};
    z2.torsion = {{}};

    ExactSequenceResult r1 = check_exact_sequence(z0, z0, zero);
    if (!r1.pass) {
        detail = "attractor=Z total=Z repeller=0 should pass: " + r1.detail;
        return false;
    }
    ExactSequenceResult r2 = check_exact_sequence(zero, zero, zero);
    if (!r2.pass) {
        detail = "all-zero triple should pass";
        return false;
    }
    ExactSequenceResult r3 = check_exact_sequence(z0, z2, zero);
    if (r3.pass || r3.fail_degree != 0) {
        detail = "rank-2 middle group must fail at degree 0";
        return false;
    }
    return true;
}

} // namespace

SelftestResult run_selftest() {
    SelftestResult res;
    res.pass = true;
    struct Suite {
        const char* name;
        bool (*fn)(std::string&);
    };
    const Suite suites[] = {
        {"invariant_part vs brute-force graph search (200 random maps)", suite_invariant_part},
        {"components vs independent flood fill (200 random sets)", suite_components},
        {"homology of hand-reduced pairs", suite_homology},
        {"exact-sequence rank cases", suite_exact_sequence},
    };
    for (const Suite& s : suites) {
        std::string detail;
        bool ok = false;
        try {
            ok = s.fn(detail);
        } catch (const std::exception& e) {
            detail = e.what();
        }
        res.table += std::string(ok ? "[ ok ] " : "[FAIL] ") + s.name +
                     (ok || detail.empty() ? "" : " -- " + detail) + "\n";
        res.pass = res.pass && ok;
    }
    return res;
}

} // namespace cubicon
