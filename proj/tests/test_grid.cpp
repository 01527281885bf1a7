#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cubicon/errors.hpp"
#include "cubicon/grid.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace cubicon;

namespace {

GridPtr grid2(double lo, double hi, int div) {
    Box b;
    b.bounds = {{lo, hi}, {lo, hi}};
    return make_grid(b, {div, div});
}

} // namespace

TEST_CASE("box validation names the axis") {
    Box b;
    b.bounds = {{0.0, 1.0}, {2.0, 2.0}};
    try {
        b.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("axis 1") != std::string::npos);
    }
}

TEST_CASE("cell index <-> coordinates is a bijection") {
    Box b;
    b.bounds = {{-1.0, 2.0}, {0.0, 1.0}, {-3.0, -1.0}};
    GridPtr g = make_grid(b, {7, 5, 3});
    REQUIRE(g->cell_count() == 7u * 5u * 3u);
    int c[3];
    for (std::uint64_t i = 0; i < g->cell_count(); ++i) {
        g->cell_coords(i, c);
        CHECK(g->cell_index(c) == i);
    }
    // centers locate back to their own cell
    double p[3];
    for (std::uint64_t i = 0; i < g->cell_count(); ++i) {
        g->cell_center(i, p);
        CHECK(g->locate(p) == i);
    }
    double outside[3] = {5.0, 0.5, -2.0};
    CHECK(g->locate(outside) == UINT64_MAX);
}

TEST_CASE("set algebra requires one grid") {
    GridPtr a = grid2(0, 1, 4);
    GridPtr b = grid2(0, 1, 8);
    CellSet sa(a), sb(b);
    CHECK_THROWS_AS(sa.unite(sb), GridMismatch);
    CHECK_THROWS_AS(sa.intersect(sb), GridMismatch);
    CHECK_THROWS_AS(sa.subtract(sb), GridMismatch);
}

TEST_CASE("set operations") {
    GridPtr g = grid2(0, 4, 4);
    CellSet a(g), b(g);
    a.insert(0);
    a.insert(5);
    b.insert(5);
    b.insert(9);
    CellSet u = a;
    u.unite(b);
    CHECK(u.count() == 3);
    CellSet i = a;
    i.intersect(b);
    CHECK(i.count() == 1);
    CHECK(i.contains(5));
    CellSet d = a;
    d.subtract(b);
    CHECK(d.count() == 1);
    CHECK(d.contains(0));
    CHECK(a.intersects(b));
    CHECK(i.is_subset_of(a));
    CHECK(!a.is_subset_of(b));
}

TEST_CASE("cover_box keeps straddling cells") {
    GridPtr g = grid2(0, 4, 4); // cell side 1
    Box region;
    region.bounds = {{0.5, 2.5}, {1.2, 1.8}};
    CellSet s = CellSet::cover_box(g, region);
    // x covers cells 0..2, y covers cell 1
    CHECK(s.count() == 3);
    CHECK(s.contains(4 * 1 + 0));
    CHECK(s.contains(4 * 1 + 1));
    CHECK(s.contains(4 * 1 + 2));
}

TEST_CASE("dilate and boundary layer") {
    GridPtr g = grid2(0, 8, 8);
    CellSet s(g);
    s.insert(8 * 4 + 4);
    CellSet d1 = s.dilate(1);
    CHECK(d1.count() == 9);
    CellSet d1f = s.dilate(1, false);
    CHECK(d1f.count() == 5);
    CellSet b = d1.boundary_layer();
    CHECK(b.count() == 8); // ring of the 3x3 block
    // a cell on the grid edge is always boundary
    CellSet e(g);
    e.insert(0);
    CHECK(e.boundary_layer().count() == 1);
    CHECK(e.grid_edge_cells().count() == 1);
}

TEST_CASE("components match a flood-fill oracle on random sets") {
    std::mt19937 rng(424242u);
    for (int rep = 0; rep < 1000; ++rep) {
        int nx = 8, ny = 8;
        GridPtr g = grid2(0, 8, 8);
        CellSet s(g);
        std::vector<char> mask(nx * ny, 0);
        for (int c = 0; c < nx * ny; ++c)
            if (rng() % 2) {
                s.insert(c);
                mask[c] = 1;
            }
        std::vector<CellSet> comps = components(s);
        // oracle: BFS flood fill with first-cell ordering
        std::vector<int> label(nx * ny, -1);
        int next = 0;
        for (int c = 0; c < nx * ny; ++c) {
            if (!mask[c] || label[c] >= 0) continue;
            std::vector<int> stack{c};
            label[c] = next;
            while (!stack.empty()) {
                int v = stack.back();
                stack.pop_back();
                int x = v % nx, y = v / nx;
                int nb[4] = {x > 0 ? v - 1 : -1, x + 1 < nx ? v + 1 : -1,
                             y > 0 ? v - nx : -1, y + 1 < ny ? v + nx : -1};
                for (int u : nb)
                    if (u >= 0 && mask[u] && label[u] < 0) {
                        label[u] = next;
                        stack.push_back(u);
                    }
            }
            ++next;
        }
        REQUIRE(static_cast<int>(comps.size()) == next);
        for (int c = 0; c < nx * ny; ++c) {
            if (!mask[c]) continue;
            CHECK(comps[label[c]].contains(c));
        }
    }
}

TEST_CASE("components of the empty set") {
    GridPtr g = grid2(0, 4, 4);
    CHECK(components(CellSet(g)).empty());
}

TEST_CASE("diameter basics") {
    GridPtr g = grid2(0, 8, 8); // cell side 1, centers at k+0.5
    CellSet one(g);
    one.insert(0);
    CHECK(diameter(one) == doctest::Approx(0.0));
    CellSet two(g);
    two.insert(0);          // center (0.5, 0.5)
    two.insert(8 * 3 + 7);  // center (7.5, 3.5)
    CHECK(diameter(two) == doctest::Approx(std::sqrt(49.0 + 9.0)));
    CHECK_THROWS_AS(diameter(CellSet(g)), EmptySet);
    // exactness against brute force on random sets
    std::mt19937 rng(7u);
    for (int rep = 0; rep < 50; ++rep) {
        CellSet s(g);
        std::vector<std::uint64_t> cells;
        for (int c = 0; c < 64; ++c)
            if (rng() % 3 == 0) {
                s.insert(c);
                cells.push_back(c);
            }
        if (cells.empty()) continue;
        double best = 0;
        double pa[2], pb[2];
        for (size_t i = 0; i < cells.size(); ++i)
            for (size_t j = i; j < cells.size(); ++j) {
                g->cell_center(cells[i], pa);
                g->cell_center(cells[j], pb);
                best = std::max(best, std::hypot(pa[0] - pb[0], pa[1] - pb[1]));
            }
        CHECK(diameter(s) == doctest::Approx(best));
    }
}

TEST_CASE("refine2 produces children on the doubled grid") {
    GridPtr g = grid2(0, 4, 4);
    CellSet s(g);
    s.insert(5);
    CellSet r = s.refine2();
    CHECK(r.count() == 4);
    CHECK(r.grid()->divisions()[0] == 8);
    // children cover the same geometric square
    double lo[2];
    s.grid()->cell_low(5, lo);
    double plo[2];
    r.for_each([&](std::uint64_t i) {
        r.grid()->cell_low(i, plo);
        CHECK(plo[0] >= lo[0] - 1e-12);
        CHECK(plo[1] >= lo[1] - 1e-12);
    });
}

TEST_CASE("cellset serialization round trip") {
    namespace fs = std::filesystem;
    GridPtr g = grid2(-2, 2, 16);
    CellSet s(g);
    std::mt19937 rng(99u);
    for (int c = 0; c < 256; ++c)
        if (rng() % 4 == 0) s.insert(c);
    fs::path dir = fs::temp_directory_path() / "cubicon_test_cellset";
    fs::create_directories(dir);
    std::string path = (dir / "set.bin").string();
    save_cellset(s, path);
    CellSet back = load_cellset(path);
    CHECK(back == s);
    CHECK(back.checksum() == s.checksum());

    // corrupting the payload trips the checksum
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-1, std::ios::end);
        char c = 0x5a;
        f.write(&c, 1);
    }
    CHECK_THROWS_AS(load_cellset(path), Error);
    fs::remove_all(dir);
}

TEST_CASE("csv export lists centers in ascending order") {
    GridPtr g = grid2(0, 2, 2);
    CellSet s(g);
    s.insert(0);
    s.insert(3);
    std::string csv = cellset_centers_csv(s);
    CHECK(csv == "index,c0,c1\n0,0.5,0.5\n3,1.5,1.5\n");
}
