#include "cubicon/flowmap.hpp"
#include "cubicon/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <thread>

namespace cubicon {

namespace {

void parallel_for(std::uint64_t n, int threads, const std::function<void(std::uint64_t, std::uint64_t)>& body) {
    if (threads <= 1 || n < 2) {
        body(0, n);
        return;
    }
    int t = std::min<std::uint64_t>(threads, n);
    std::vector<std::thread> pool;
    std::uint64_t chunk = (n + t - 1) / t;
    for (int i = 0; i < t; ++i) {
        std::uint64_t lo = i * chunk;
        std::uint64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

} // namespace

CellSet MultivaluedMap::image_of(const CellSet& s) const {
    CellSet out(grid);
    s.for_each([&](std::uint64_t c) {
        if (!in_domain(c)) return;
        auto [b, e] = image(c);
        for (const std::uint32_t* p = b; p != e; ++p) out.insert(*p);
    });
    return out;
}

MultivaluedMap outer_approximation(const ParametrizedFlow& flow, double lambda,
                                   GridPtr grid, const EscapePolicy& policy,
                                   const OuterApproxOptions& opts) {
    if (flow.dim != grid->dim())
        throw ConfigError("flow and grid dimensions differ");
    if (opts.tau <= 0)
        throw ConfigError("tau must be positive");
    if (opts.samples_per_axis < 2)
        throw ConfigError("samples_per_axis must be at least 2");
    if (policy.radius > 0 && policy.radius <= grid->box().circumradius())
        throw ConfigError("escape radius must exceed the grid box circumradius");
    if (grid->cell_count() > UINT32_MAX)
        throw ConfigError("grid too large for the multivalued map");

    int bloat = opts.bloat;
    if (bloat < 0) {
        if (flow.lipschitz_hint) {
            double minside = grid->cell_side(0);
            for (int a = 1; a < grid->dim(); ++a)
                minside = std::min(minside, grid->cell_side(a));
            bloat = static_cast<int>(
                std::ceil(*flow.lipschitz_hint * opts.tau * grid->cell_diagonal() / minside));
        } else {
            bloat = 1;
        }
    }

    const CubicalGrid& g = *grid;
    const int n = g.dim();
    const int spa = opts.samples_per_axis;
    const bool restricted = opts.restrict_to.has_value();
    const bool drop_mode =
        restricted && opts.restriction_mode == OuterApproxOptions::RestrictionMode::Drop;

    std::vector<std::uint64_t> cells =
        restricted ? opts.restrict_to->to_indices() : CellSet::full(grid).to_indices();

    struct CellOut {
        std::vector<std::uint32_t> targets;
        bool escapes = false;
        bool diag = false;
    };
    std::vector<CellOut> out(cells.size());

    IntegrateOptions iopts;
    iopts.tol = opts.tol;
    if (restricted && opts.early_exit_margin > 0) {
        double lo = 0, hi = 0;
        bool first = true;
        std::vector<double> c(n);
        opts.restrict_to->for_each([&](std::uint64_t cell) {
            g.cell_center(cell, c.data());
            double s = 0;
            for (int a = 0; a < n; ++a) s += c[a] * c[a];
            s = std::sqrt(s);
            if (first) {
                lo = hi = s;
                first = false;
            } else {
                lo = std::min(lo, s);
                hi = std::max(hi, s);
            }
        });
        double pad = g.cell_diagonal() / 2 + opts.early_exit_margin * g.cell_diagonal();
        iopts.stop_lo = std::max(0.0, lo - pad);
        iopts.stop_hi = hi + pad;
    }

    std::atomic<bool> any_diag{false};
    parallel_for(cells.size(), opts.threads, [&](std::uint64_t lo, std::uint64_t hi) {
        std::vector<double> low(n), pt(n), end(n);
        std::vector<int> cc(n), sc(n), nb(n);
        std::vector<std::uint32_t> hits;
        for (std::uint64_t ci = lo; ci < hi; ++ci) {
            std::uint64_t cell = cells[ci];
            CellOut& co = out[ci];
            g.cell_low(cell, low.data());
            hits.clear();
            // integrate the sample lattice (corners + interior lattice)
            std::fill(sc.begin(), sc.end(), 0);
            for (;;) {
                for (int a = 0; a < n; ++a)
                    pt[a] = low[a] + g.cell_side(a) * sc[a] / (spa - 1);
                bool finished = true;
                bool diag = false;
                try {
                    finished = integrate_endpoint(flow, lambda, pt.data(), opts.tau,
                                                  policy, iopts, end.data());
                } catch (const Error&) {
                    diag = true;
                }
                if (diag) {
                    co.escapes = true;
                    co.diag = true;
                } else if (!finished) {
                    if (!drop_mode) co.escapes = true; // left the escape ball / region
                } else {
                    std::uint64_t tcell = g.locate(end.data());
                    if (tcell == UINT64_MAX) {
                        if (!drop_mode) co.escapes = true; // endpoint outside the grid box
                    } else {
                        hits.push_back(static_cast<std::uint32_t>(tcell));
                    }
                }
                int a = 0;
                for (; a < n; ++a) {
                    if (++sc[a] < spa) break;
                    sc[a] = 0;
                }
                if (a == n) break;
            }
            std::sort(hits.begin(), hits.end());
            hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
            // fatten by `bloat` layers of neighbors (diagonal-including)
            if (bloat > 0) {
                std::vector<std::uint32_t> fat;
                for (std::uint32_t h : hits) {
                    g.cell_coords(h, cc.data());
                    std::vector<int> off(n, -bloat);
                    for (;;) {
                        bool ok = true;
                        for (int a = 0; a < n; ++a) {
                            nb[a] = cc[a] + off[a];
                            if (nb[a] < 0 || nb[a] >= g.divisions()[a]) ok = false;
                        }
                        if (ok)
                            fat.push_back(static_cast<std::uint32_t>(g.cell_index(nb.data())));
                        else if (!drop_mode)
                            co.escapes = true; // fattened image meets the exterior
                        int a = 0;
                        for (; a < n; ++a) {
                            if (++off[a] <= bloat) break;
                            off[a] = -bloat;
                        }
                        if (a == n) break;
                    }
                }
                std::sort(fat.begin(), fat.end());
                fat.erase(std::unique(fat.begin(), fat.end()), fat.end());
                hits = std::move(fat);
            }
            if (restricted) {
                std::vector<std::uint32_t> kept;
                kept.reserve(hits.size());
                for (std::uint32_t h : hits) {
                    if (opts.restrict_to->contains(h))
                        kept.push_back(h);
                    else if (opts.restriction_mode == OuterApproxOptions::RestrictionMode::Escape)
                        co.escapes = true;
                }
                hits = std::move(kept);
            }
            // a cell whose samples all left keeps the escaping mark even in
            // drop mode (every cell has a nonempty image or is escaping)
            if (hits.empty()) co.escapes = true;
            co.targets = std::move(hits);
            if (co.diag) any_diag.store(true, std::memory_order_relaxed);
        }
    });

    MultivaluedMap map;
    map.grid = grid;
    map.domain = CellSet(grid);
    map.escaping = CellSet(grid);
    map.offsets.assign(g.cell_count() + 1, 0);
    std::uint64_t total = 0;
    for (std::uint64_t ci = 0; ci < cells.size(); ++ci) total += out[ci].targets.size();
    map.targets.reserve(total);
    std::uint64_t pos = 0;
    std::uint64_t next = 0; // index into cells
    for (std::uint64_t cell = 0; cell < g.cell_count(); ++cell) {
        map.offsets[cell] = pos;
        if (next < cells.size() && cells[next] == cell) {
            const CellOut& co = out[next];
            map.domain.insert(cell);
            if (co.escapes) map.escaping.insert(cell);
            map.targets.insert(map.targets.end(), co.targets.begin(), co.targets.end());
            pos += co.targets.size();
            ++next;
        }
    }
    map.offsets[g.cell_count()] = pos;
    map.integrator_diagnostics = any_diag.load();
    return map;
}

CellSet invariant_part(const MultivaluedMap& map, const CellSet& s) {
    if (!map.grid || !s.grid() || !map.grid->same_as(*s.grid()))
        throw GridMismatch("invariant_part: set and map on different grids");

    // candidate cells: in S, in the map domain, not escaping
    std::vector<std::uint64_t> nodes;
    s.for_each([&](std::uint64_t c) {
        if (map.in_domain(c) && !map.is_escaping(c)) nodes.push_back(c);
    });
    if (nodes.empty()) return CellSet(s.grid());

    std::vector<std::uint32_t> id(map.grid->cell_count(), UINT32_MAX);
    for (std::uint32_t k = 0; k < nodes.size(); ++k)
        id[nodes[k]] = k;

    // forward adjacency restricted to candidates (CSR)
    std::vector<std::uint64_t> off(nodes.size() + 1, 0);
    for (std::uint32_t k = 0; k < nodes.size(); ++k) {
        auto [b, e] = map.image(nodes[k]);
        std::uint64_t cnt = 0;
        for (const std::uint32_t* p = b; p != e; ++p)
            if (id[*p] != UINT32_MAX) ++cnt;
        off[k + 1] = off[k] + cnt;
    }
    std::vector<std::uint32_t> succ(off.back());
    std::vector<std::uint32_t> out_deg(nodes.size()), in_deg(nodes.size(), 0);
    for (std::uint32_t k = 0; k < nodes.size(); ++k) {
        auto [b, e] = map.image(nodes[k]);
        std::uint64_t w = off[k];
        for (const std::uint32_t* p = b; p != e; ++p)
            if (id[*p] != UINT32_MAX) {
                succ[w++] = id[*p];
                ++in_deg[id[*p]];
            }
        out_deg[k] = static_cast<std::uint32_t>(off[k + 1] - off[k]);
    }
    // reverse adjacency
    std::vector<std::uint64_t> roff(nodes.size() + 1, 0);
    for (std::uint32_t v : succ) ++roff[v + 1];
    for (size_t k = 1; k <= nodes.size(); ++k) roff[k] += roff[k - 1];
    std::vector<std::uint32_t> pred(succ.size());
    {
        std::vector<std::uint64_t> w(roff.begin(), roff.end() - 1);
        for (std::uint32_t k = 0; k < nodes.size(); ++k)
            for (std::uint64_t j = off[k]; j < off[k + 1]; ++j)
                pred[w[succ[j]]++] = k;
    }

    // prune to the fixed point: keep nodes with a successor and a
    // predecessor among the kept nodes
    std::vector<char> alive(nodes.size(), 1);
    std::vector<std::uint32_t> stack;
    for (std::uint32_t k = 0; k < nodes.size(); ++k)
        if (out_deg[k] == 0 || in_deg[k] == 0) {
            alive[k] = 0;
            stack.push_back(k);
        }
    while (!stack.empty()) {
        std::uint32_t v = stack.back();
        stack.pop_back();
        for (std::uint64_t j = off[v]; j < off[v + 1]; ++j) {
            std::uint32_t u = succ[j];
            if (alive[u] && --in_deg[u] == 0) {
                alive[u] = 0;
                stack.push_back(u);
            }
        }
        for (std::uint64_t j = roff[v]; j < roff[v + 1]; ++j) {
            std::uint32_t u = pred[j];
            if (alive[u] && --out_deg[u] == 0) {
                alive[u] = 0;
                stack.push_back(u);
            }
        }
    }

    CellSet result(s.grid());
    for (std::uint32_t k = 0; k < nodes.size(); ++k)
        if (alive[k]) result.insert(nodes[k]);
    return result;
}

IsolationResult is_isolating(const MultivaluedMap& map, const CellSet& n) {
    IsolationResult r;
    r.invariant = invariant_part(map, n);
    r.isolating = !r.invariant.intersects(n.boundary_layer());
    return r;
}

namespace {

bool touches_exterior(const MultivaluedMap& map, const CellSet& s) {
    bool bad = false;
    s.for_each([&](std::uint64_t c) {
        if (!map.in_domain(c) || map.is_escaping(c)) bad = true;
    });
    return bad;
}

} // namespace

IndexPair index_pair(const MultivaluedMap& map, const CellSet& k,
                     const IndexPairOptions& opts) {
    if (!map.grid || !k.grid() || !map.grid->same_as(*k.grid()))
        throw GridMismatch("index_pair: set and map on different grids");
    if (touches_exterior(map, k))
        throw NotIsolated("invariant set meets escaping cells or the working region edge");

    // Attractor attempt: close K under forward images.  If the growth
    // stabilizes and still isolates exactly K, (N, {}) is a pair with an
    // empty exit set.  The invariant-part check matters: a hull around a
    // non-attracting set can swallow neighboring invariant sets.
    CellSet n = k;
    for (int it = 0; it < opts.hull_iterations; ++it) {
        if (touches_exterior(map, n)) break;
        CellSet img = map.image_of(n);
        if (img.is_subset_of(n)) {
            if (invariant_part(map, n).is_subset_of(k.dilate(1))) {
                IndexPair p;
                p.n = n;
                p.exit = CellSet(map.grid);
                p.entrance = n.boundary_layer();
                p.provenance =
                    "positively-invariant hull (" + std::to_string(it) + " growth steps)";
                return p;
            }
            break; // the hull isolates more than K
        }
        n.unite(img);
    }

    // Generic pair: N = K plus one forward collar, exit = cells whose image
    // leaves N (or meets the exterior).
    n = k;
    n.unite(map.image_of(k));
    CellSet exit(map.grid);
    n.for_each([&](std::uint64_t c) {
        if (!map.in_domain(c) || map.is_escaping(c)) {
            exit.insert(c);
            return;
        }
        auto [b, e] = map.image(c);
        for (const std::uint32_t* p = b; p != e; ++p)
            if (!n.contains(*p)) {
                exit.insert(c);
                return;
            }
    });
    if (exit.intersects(k))
        throw NotIsolated("invariant set touches the exit set of its own collar");
    IndexPair p;
    p.n = n;
    p.exit = exit;
    p.entrance = n.boundary_layer();
    p.entrance.subtract(exit);
    p.provenance = "forward collar";
    return p;
}

MultivaluedMap synthetic_map(GridPtr grid,
                             const std::vector<std::vector<std::uint32_t>>& images,
                             const CellSet& escaping) {
    if (images.size() != grid->cell_count())
        throw ConfigError("synthetic_map: one image list per cell required");
    MultivaluedMap map;
    map.grid = grid;
    map.domain = CellSet::full(grid);
    map.escaping = escaping;
    map.offsets.assign(grid->cell_count() + 1, 0);
    for (std::uint64_t c = 0; c < images.size(); ++c) {
        std::vector<std::uint32_t> t = images[c];
        std::sort(t.begin(), t.end());
        t.erase(std::unique(t.begin(), t.end()), t.end());
        map.offsets[c] = map.targets.size();
        map.targets.insert(map.targets.end(), t.begin(), t.end());
    }
    map.offsets[grid->cell_count()] = map.targets.size();
    return map;
}

IndexPair trapping_region_pair(const MultivaluedMap& map) {
    if (!map.escaping.empty())
        throw NotTrapping("map has escaping cells; the region is not trapping");
    IndexPair p;
    p.n = map.domain;
    p.exit = CellSet(map.grid);
    p.entrance = map.domain.boundary_layer();
    p.provenance = "trapping region";
    return p;
}

} // namespace cubicon
