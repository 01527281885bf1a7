#include "cubicon/grid.hpp"
#include "cubicon/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace cubicon {

// Distance from the origin to the farthest box corner (the escape ball is
// centered at the origin).
double Box::circumradius() const {
    double s = 0;
    for (const auto& [lo, hi] : bounds) {
        double far = std::max(std::abs(lo), std::abs(hi));
        s += far * far;
    }
    return std::sqrt(s);
}

bool Box::contains(const double* p) const {
    for (size_t a = 0; a < bounds.size(); ++a)
        if (p[a] < bounds[a].first || p[a] > bounds[a].second)
            return false;
    return true;
}

void Box::validate() const {
    if (bounds.empty())
        throw ConfigError("box has no axes");
    for (size_t a = 0; a < bounds.size(); ++a)
        if (!(bounds[a].first < bounds[a].second))
            throw ConfigError("box axis " + std::to_string(a) +
                              ": lo must be strictly below hi");
}

CubicalGrid::CubicalGrid(Box box, std::vector<int> divisions)
    : box_(std::move(box)), divisions_(std::move(divisions)) {
    box_.validate();
    if (static_cast<int>(divisions_.size()) != box_.dim())
        throw ConfigError("divisions dimension does not match box dimension");
    ncells_ = 1;
    for (size_t a = 0; a < divisions_.size(); ++a) {
        if (divisions_[a] <= 0)
            throw ConfigError("divisions axis " + std::to_string(a) + ": must be positive");
        std::uint64_t next = ncells_ * static_cast<std::uint64_t>(divisions_[a]);
        if (next / static_cast<std::uint64_t>(divisions_[a]) != ncells_ ||
            next > (1ull << 40))
            throw ConfigError("total cell count does not fit machine indexing");
        ncells_ = next;
        side_.push_back(box_.extent(static_cast<int>(a)) / divisions_[a]);
    }
    stride_.resize(divisions_.size());
    std::uint64_t st = 1;
    for (size_t a = 0; a < divisions_.size(); ++a) {
        stride_[a] = st;
        st *= static_cast<std::uint64_t>(divisions_[a]);
    }
}

double CubicalGrid::cell_diagonal() const {
    double s = 0;
    for (double h : side_) s += h * h;
    return std::sqrt(s);
}

void CubicalGrid::cell_coords(std::uint64_t index, int* coords) const {
    for (size_t a = 0; a < divisions_.size(); ++a) {
        coords[a] = static_cast<int>(index % static_cast<std::uint64_t>(divisions_[a]));
        index /= static_cast<std::uint64_t>(divisions_[a]);
    }
}

std::uint64_t CubicalGrid::cell_index(const int* coords) const {
    std::uint64_t idx = 0;
    for (size_t a = 0; a < divisions_.size(); ++a)
        idx += stride_[a] * static_cast<std::uint64_t>(coords[a]);
    return idx;
}

void CubicalGrid::cell_center(std::uint64_t index, double* out) const {
    int c[16];
    cell_coords(index, c);
    for (size_t a = 0; a < divisions_.size(); ++a)
        out[a] = box_.lo(static_cast<int>(a)) + (c[a] + 0.5) * side_[a];
}

void CubicalGrid::cell_low(std::uint64_t index, double* out) const {
    int c[16];
    cell_coords(index, c);
    for (size_t a = 0; a < divisions_.size(); ++a)
        out[a] = box_.lo(static_cast<int>(a)) + c[a] * side_[a];
}

std::uint64_t CubicalGrid::locate(const double* p) const {
    std::uint64_t idx = 0;
    for (size_t a = 0; a < divisions_.size(); ++a) {
        double t = (p[a] - box_.lo(static_cast<int>(a))) / side_[a];
        if (t < 0 || p[a] > box_.hi(static_cast<int>(a)))
            return UINT64_MAX;
        int c = static_cast<int>(t);
        if (c >= divisions_[a]) c = divisions_[a] - 1; // hi face belongs to last cell
        idx += stride_[a] * static_cast<std::uint64_t>(c);
    }
    return idx;
}

bool CubicalGrid::same_as(const CubicalGrid& other) const {
    return this == &other ||
           (divisions_ == other.divisions_ && box_.bounds == other.box_.bounds);
}

GridPtr make_grid(Box box, std::vector<int> divisions) {
    return std::make_shared<const CubicalGrid>(std::move(box), std::move(divisions));
}

CellSet::CellSet(GridPtr grid) : grid_(std::move(grid)) {
    words_.assign((grid_->cell_count() + 63) / 64, 0);
}

void CellSet::check_same_grid(const CellSet& o) const {
    if (!grid_ || !o.grid_ || !grid_->same_as(*o.grid_))
        throw GridMismatch("cell sets live on different grids");
}

std::uint64_t CellSet::count() const {
    std::uint64_t n = 0;
    for (std::uint64_t w : words_) n += static_cast<std::uint64_t>(__builtin_popcountll(w));
    return n;
}

bool CellSet::contains(std::uint64_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1ull;
}
void CellSet::insert(std::uint64_t i) { words_[i >> 6] |= 1ull << (i & 63); }
void CellSet::erase(std::uint64_t i) { words_[i >> 6] &= ~(1ull << (i & 63)); }

CellSet& CellSet::unite(const CellSet& o) {
    check_same_grid(o);
    for (size_t w = 0; w < words_.size(); ++w) words_[w] |= o.words_[w];
    return *this;
}
CellSet& CellSet::intersect(const CellSet& o) {
    check_same_grid(o);
    for (size_t w = 0; w < words_.size(); ++w) words_[w] &= o.words_[w];
    return *this;
}
CellSet& CellSet::subtract(const CellSet& o) {
    check_same_grid(o);
    for (size_t w = 0; w < words_.size(); ++w) words_[w] &= ~o.words_[w];
    return *this;
}
bool CellSet::intersects(const CellSet& o) const {
    check_same_grid(o);
    for (size_t w = 0; w < words_.size(); ++w)
        if (words_[w] & o.words_[w]) return true;
    return false;
}
bool CellSet::is_subset_of(const CellSet& o) const {
    check_same_grid(o);
    for (size_t w = 0; w < words_.size(); ++w)
        if (words_[w] & ~o.words_[w]) return false;
    return true;
}
bool CellSet::operator==(const CellSet& o) const {
    check_same_grid(o);
    return words_ == o.words_;
}

std::vector<std::uint64_t> CellSet::to_indices() const {
    std::vector<std::uint64_t> out;
    out.reserve(count());
    for_each([&](std::uint64_t i) { out.push_back(i); });
    return out;
}

CellSet CellSet::full(GridPtr grid) {
    CellSet s(grid);
    std::uint64_t n = grid->cell_count();
    for (std::uint64_t i = 0; i < n / 64; ++i) s.words_[i] = ~0ull;
    if (n % 64) s.words_[n / 64] = (1ull << (n % 64)) - 1;
    return s;
}

CellSet CellSet::from_indices(GridPtr grid, const std::vector<std::uint64_t>& idx) {
    CellSet s(grid);
    for (std::uint64_t i : idx) s.insert(i);
    return s;
}

CellSet CellSet::cover_box(GridPtr grid, const Box& region) {
    if (region.dim() != grid->dim())
        throw ConfigError("cover_box region dimension mismatch");
    int n = grid->dim();
    std::vector<int> lo(n), hi(n);
    for (int a = 0; a < n; ++a) {
        double h = grid->cell_side(a);
        double glo = grid->box().lo(a);
        // cells whose closed cube intersects the closed region (cells
        // straddling the region boundary belong to the region)
        int i0 = static_cast<int>(std::floor((region.lo(a) - glo) / h));
        while (glo + (i0 + 1) * h < region.lo(a)) ++i0;
        int i1 = static_cast<int>(std::ceil((region.hi(a) - glo) / h));
        while (glo + (i1 - 1) * h > region.hi(a)) --i1;
        lo[a] = std::clamp(i0, 0, grid->divisions()[a] - 1);
        hi[a] = std::clamp(i1 - 1, lo[a], grid->divisions()[a] - 1);
    }
    CellSet s(grid);
    std::vector<int> c(lo);
    for (;;) {
        s.insert(grid->cell_index(c.data()));
        int a = 0;
        for (; a < n; ++a) {
            if (++c[a] <= hi[a]) break;
            c[a] = lo[a];
        }
        if (a == n) break;
    }
    return s;
}

CellSet CellSet::dilate(int layers, bool chebyshev) const {
    if (layers <= 0) return *this;
    const CubicalGrid& g = *grid_;
    int n = g.dim();
    CellSet cur = *this;
    for (int l = 0; l < layers; ++l) {
        CellSet next = cur;
        int c[16], nb[16];
        if (chebyshev) {
            cur.for_each([&](std::uint64_t i) {
                g.cell_coords(i, c);
                // enumerate the 3^n - 1 neighbors
                int off[16];
                for (int a = 0; a < n; ++a) off[a] = -1;
                for (;;) {
                    bool all0 = true;
                    bool ok = true;
                    for (int a = 0; a < n; ++a) {
                        if (off[a] != 0) all0 = false;
                        nb[a] = c[a] + off[a];
                        if (nb[a] < 0 || nb[a] >= g.divisions()[a]) ok = false;
                    }
                    if (!all0 && ok) next.insert(g.cell_index(nb));
                    int a = 0;
                    for (; a < n; ++a) {
                        if (++off[a] <= 1) break;
                        off[a] = -1;
                    }
                    if (a == n) break;
                }
            });
        } else {
            cur.for_each([&](std::uint64_t i) {
                g.cell_coords(i, c);
                for (int a = 0; a < n; ++a) {
                    for (int d : {-1, 1}) {
                        int v = c[a] + d;
                        if (v < 0 || v >= g.divisions()[a]) continue;
                        std::memcpy(nb, c, sizeof(int) * n);
                        nb[a] = v;
                        next.insert(g.cell_index(nb));
                    }
                }
            });
        }
        cur = std::move(next);
    }
    return cur;
}

CellSet CellSet::boundary_layer() const {
    const CubicalGrid& g = *grid_;
    int n = g.dim();
    CellSet out(grid_);
    int c[16], nb[16];
    for_each([&](std::uint64_t i) {
        g.cell_coords(i, c);
        for (int a = 0; a < n; ++a) {
            for (int d : {-1, 1}) {
                int v = c[a] + d;
                if (v < 0 || v >= g.divisions()[a]) {
                    out.insert(i); // grid edge counts as outside
                    return;
                }
                std::memcpy(nb, c, sizeof(int) * n);
                nb[a] = v;
                if (!contains(g.cell_index(nb))) {
                    out.insert(i);
                    return;
                }
            }
        }
    });
    return out;
}

CellSet CellSet::grid_edge_cells() const {
    const CubicalGrid& g = *grid_;
    int n = g.dim();
    CellSet out(grid_);
    int c[16];
    for_each([&](std::uint64_t i) {
        g.cell_coords(i, c);
        for (int a = 0; a < n; ++a)
            if (c[a] == 0 || c[a] == g.divisions()[a] - 1) {
                out.insert(i);
                return;
            }
    });
    return out;
}

CellSet CellSet::refine2() const {
    const CubicalGrid& g = *grid_;
    int n = g.dim();
    std::vector<int> div2 = g.divisions();
    for (int& d : div2) d *= 2;
    GridPtr g2 = make_grid(g.box(), div2);
    CellSet out(g2);
    int c[16], cc[16];
    for_each([&](std::uint64_t i) {
        g.cell_coords(i, c);
        for (std::uint64_t m = 0; m < (1ull << n); ++m) {
            for (int a = 0; a < n; ++a)
                cc[a] = 2 * c[a] + static_cast<int>((m >> a) & 1);
            out.insert(g2->cell_index(cc));
        }
    });
    return out;
}

std::uint64_t CellSet::checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t w : words_) {
        for (int b = 0; b < 8; ++b) {
            h ^= (w >> (8 * b)) & 0xff;
            h *= 1099511628211ull;
        }
    }
    return h;
}

std::vector<CellSet> components(const CellSet& s) {
    std::vector<CellSet> out;
    if (!s.grid()) return out;
    const CubicalGrid& g = *s.grid();
    int n = g.dim();
    CellSet seen(s.grid());
    int c[16], nb[16];
    s.for_each([&](std::uint64_t start) {
        if (seen.contains(start)) return;
        CellSet comp(s.grid());
        std::vector<std::uint64_t> stack{start};
        seen.insert(start);
        comp.insert(start);
        while (!stack.empty()) {
            std::uint64_t i = stack.back();
            stack.pop_back();
            g.cell_coords(i, c);
            for (int a = 0; a < n; ++a) {
                for (int d : {-1, 1}) {
                    int v = c[a] + d;
                    if (v < 0 || v >= g.divisions()[a]) continue;
                    std::memcpy(nb, c, sizeof(int) * n);
                    nb[a] = v;
                    std::uint64_t j = g.cell_index(nb);
                    if (s.contains(j) && !seen.contains(j)) {
                        seen.insert(j);
                        comp.insert(j);
                        stack.push_back(j);
                    }
                }
            }
        }
        out.push_back(std::move(comp));
    });
    return out;
}

double diameter(const CellSet& s) {
    if (s.empty())
        throw EmptySet("diameter of empty cell set");
    const CubicalGrid& g = *s.grid();
    int n = g.dim();
    // The farthest pair lies among boundary cells of the set.
    CellSet bnd = s.boundary_layer();
    std::vector<std::uint64_t> idx = bnd.to_indices();
    std::vector<double> pts(idx.size() * n);
    for (size_t k = 0; k < idx.size(); ++k)
        g.cell_center(idx[k], &pts[k * n]);
    // Prune with the triangle inequality around the centroid: points sorted
    // by distance from the centroid, inner loop cut when r_i + r_j can no
    // longer beat the best pair.
    std::vector<double> centroid(n, 0.0);
    for (size_t k = 0; k < idx.size(); ++k)
        for (int a = 0; a < n; ++a) centroid[a] += pts[k * n + a];
    for (int a = 0; a < n; ++a) centroid[a] /= static_cast<double>(idx.size());
    std::vector<std::pair<double, size_t>> order(idx.size());
    for (size_t k = 0; k < idx.size(); ++k) {
        double d = 0;
        for (int a = 0; a < n; ++a) {
            double t = pts[k * n + a] - centroid[a];
            d += t * t;
        }
        order[k] = {std::sqrt(d), k};
    }
    std::sort(order.begin(), order.end(), [](const auto& x, const auto& y) {
        return x.first > y.first || (x.first == y.first && x.second < y.second);
    });
    double best = 0;
    for (size_t i = 0; i < order.size(); ++i) {
        if (2 * order[i].first <= best) break;
        for (size_t j = i + 1; j < order.size(); ++j) {
            if (order[i].first + order[j].first <= best) break;
            const double* p = &pts[order[i].second * n];
            const double* q = &pts[order[j].second * n];
            double d = 0;
            for (int a = 0; a < n; ++a) {
                double t = p[a] - q[a];
                d += t * t;
            }
            best = std::max(best, std::sqrt(d));
        }
    }
    return best;
}

double max_center_norm(const CellSet& s) {
    if (!s.grid()) return 0;
    const CubicalGrid& g = *s.grid();
    int n = g.dim();
    double c[16];
    double best = 0;
    s.for_each([&](std::uint64_t i) {
        g.cell_center(i, c);
        double d = 0;
        for (int a = 0; a < n; ++a) d += c[a] * c[a];
        best = std::max(best, d);
    });
    return std::sqrt(best);
}

namespace {

struct RleRun {
    std::uint64_t start;
    std::uint64_t len;
};

std::vector<RleRun> to_runs(const CellSet& s) {
    std::vector<RleRun> runs;
    bool open = false;
    std::uint64_t start = 0, prev = 0;
    s.for_each([&](std::uint64_t i) {
        if (!open) {
            open = true;
            start = prev = i;
        } else if (i == prev + 1) {
            prev = i;
        } else {
            runs.push_back({start, prev - start + 1});
            start = prev = i;
        }
    });
    if (open) runs.push_back({start, prev - start + 1});
    return runs;
}

void put_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

constexpr std::uint64_t kCellSetMagic = 0x4355424943534554ull; // "CUBICSET"

} // namespace

void save_cellset(const CellSet& s, const std::string& path) {
    if (!s.grid())
        throw ConfigError("cannot save a cell set without a grid");
    const CubicalGrid& g = *s.grid();
    std::vector<RleRun> runs = to_runs(s);

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open for writing: " + path);
    put_u64(out, kCellSetMagic);
    put_u64(out, 1); // format version
    put_u64(out, static_cast<std::uint64_t>(g.dim()));
    for (int a = 0; a < g.dim(); ++a)
        put_u64(out, static_cast<std::uint64_t>(g.divisions()[a]));
    put_u64(out, runs.size());
    for (const RleRun& r : runs) {
        put_u64(out, r.start);
        put_u64(out, r.len);
    }
    if (!out)
        throw IoError("write failed: " + path);

    nlohmann::ordered_json side;
    side["format"] = "cubicon-cellset";
    side["version"] = 1;
    nlohmann::ordered_json jb = nlohmann::ordered_json::array();
    for (int a = 0; a < g.dim(); ++a)
        jb.push_back({g.box().lo(a), g.box().hi(a)});
    side["box"] = jb;
    side["divisions"] = g.divisions();
    side["cells"] = s.count();
    side["runs"] = runs.size();
    side["checksum"] = s.checksum();
    std::ofstream js(path + ".json");
    if (!js)
        throw IoError("cannot open for writing: " + path + ".json");
    js << side.dump(2) << "\n";
}

CellSet load_cellset(const std::string& path) {
    std::ifstream js(path + ".json");
    if (!js)
        throw IoError("cannot open sidecar: " + path + ".json");
    nlohmann::json side = nlohmann::json::parse(js, nullptr, true);
    Box box;
    for (const auto& b : side.at("box"))
        box.bounds.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
    std::vector<int> div = side.at("divisions").get<std::vector<int>>();
    GridPtr grid = make_grid(box, div);

    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open: " + path);
    if (get_u64(in) != kCellSetMagic)
        throw ParseError("bad cell set magic in " + path);
    if (get_u64(in) != 1)
        throw ParseError("unsupported cell set version in " + path);
    std::uint64_t dim = get_u64(in);
    if (dim != static_cast<std::uint64_t>(grid->dim()))
        throw ParseError("cell set dimension mismatch in " + path);
    for (int a = 0; a < grid->dim(); ++a)
        if (get_u64(in) != static_cast<std::uint64_t>(grid->divisions()[a]))
            throw ParseError("cell set divisions mismatch in " + path);
    std::uint64_t nruns = get_u64(in);
    CellSet s(grid);
    for (std::uint64_t r = 0; r < nruns; ++r) {
        std::uint64_t start = get_u64(in);
        std::uint64_t len = get_u64(in);
        if (!in || start + len > grid->cell_count())
            throw ParseError("corrupt run in " + path);
        for (std::uint64_t i = 0; i < len; ++i) s.insert(start + i);
    }
    if (side.contains("checksum") &&
        side.at("checksum").get<std::uint64_t>() != s.checksum())
        throw ParseError("checksum mismatch in " + path);
    return s;
}

std::string cellset_centers_csv(const CellSet& s) {
    const CubicalGrid& g = *s.grid();
    int n = g.dim();
    std::string out = "index";
    for (int a = 0; a < n; ++a) out += ",c" + std::to_string(a);
    out += "\n";
    double c[16];
    char buf[64];
    s.for_each([&](std::uint64_t i) {
        g.cell_center(i, c);
        out += std::to_string(i);
        for (int a = 0; a < n; ++a) {
            std::snprintf(buf, sizeof buf, ",%.12g", c[a]);
            out += buf;
        }
        out += "\n";
    });
    return out;
}

} // namespace cubicon
