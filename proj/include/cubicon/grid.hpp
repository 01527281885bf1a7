#ifndef CUBICON_GRID_HPP
#define CUBICON_GRID_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace cubicon {

// Compact axis-aligned box.
struct Box {
    std::vector<std::pair<double, double>> bounds; // per-axis (lo, hi)

    int dim() const { return static_cast<int>(bounds.size()); }
    double lo(int a) const { return bounds[a].first; }
    double hi(int a) const { return bounds[a].second; }
    double extent(int a) const { return bounds[a].second - bounds[a].first; }
    // Radius of the circumscribed sphere around the box center.
    double circumradius() const;
    bool contains(const double* p) const;
    void validate() const; // throws ConfigError naming the offending axis
};

// Uniform grid over a box.  Cells are indexed linearly with axis 0 fastest;
// the index <-> coordinate maps are bijective.
class CubicalGrid {
public:
    CubicalGrid(Box box, std::vector<int> divisions);

    int dim() const { return box_.dim(); }
    const Box& box() const { return box_; }
    const std::vector<int>& divisions() const { return divisions_; }
    std::uint64_t cell_count() const { return ncells_; }
    double cell_side(int a) const { return side_[a]; }
    double cell_diagonal() const;

    void cell_coords(std::uint64_t index, int* coords) const;
    std::uint64_t cell_index(const int* coords) const;
    void cell_center(std::uint64_t index, double* out) const;
    void cell_low(std::uint64_t index, double* out) const;
    // Cell containing p, or -1 (as uint64 max) if p lies outside the box.
    std::uint64_t locate(const double* p) const;

    bool same_as(const CubicalGrid& other) const;

private:
    Box box_;
    std::vector<int> divisions_;
    std::vector<double> side_;
    std::vector<std::uint64_t> stride_;
    std::uint64_t ncells_ = 0;
};

using GridPtr = std::shared_ptr<const CubicalGrid>;

GridPtr make_grid(Box box, std::vector<int> divisions);

// Bit-set of cells over a fixed grid.  Set algebra requires both operands
// to live on the same grid (GridMismatch otherwise).
class CellSet {
public:
    CellSet() = default;
    explicit CellSet(GridPtr grid);

    const GridPtr& grid() const { return grid_; }
    bool empty() const { return count() == 0; }
    std::uint64_t count() const;
    bool contains(std::uint64_t index) const;
    void insert(std::uint64_t index);
    void erase(std::uint64_t index);

    CellSet& unite(const CellSet& o);
    CellSet& intersect(const CellSet& o);
    CellSet& subtract(const CellSet& o);
    bool intersects(const CellSet& o) const;
    bool is_subset_of(const CellSet& o) const;
    bool operator==(const CellSet& o) const;

    // Ascending cell indices.
    std::vector<std::uint64_t> to_indices() const;
    template <class Fn>
    void for_each(Fn&& fn) const {
        for (std::uint64_t w = 0; w < words_.size(); ++w) {
            std::uint64_t bits = words_[w];
            while (bits) {
                int b = __builtin_ctzll(bits);
                fn(w * 64 + static_cast<std::uint64_t>(b));
                bits &= bits - 1;
            }
        }
    }

    static CellSet full(GridPtr grid);
    static CellSet from_indices(GridPtr grid, const std::vector<std::uint64_t>& idx);
    // All cells whose closed cube intersects the given box (outer cover).
    static CellSet cover_box(GridPtr grid, const Box& region);

    // Morphology.  `chebyshev` uses the full (diagonal-including)
    // neighborhood, otherwise face neighbors only.
    CellSet dilate(int layers, bool chebyshev = true) const;
    // Cells of this set with a face-neighbor outside the set (cells on the
    // grid box edge count as boundary).
    CellSet boundary_layer() const;
    // Cells touching the grid box edge.
    CellSet grid_edge_cells() const;

    // Same set on the grid refined 2x per axis (each cell -> 2^n children).
    CellSet refine2() const;

    std::uint64_t checksum() const; // FNV-1a over the words

private:
    void check_same_grid(const CellSet& o) const;
    GridPtr grid_;
    std::vector<std::uint64_t> words_;
};

// Face-adjacency connected components in deterministic order (by smallest
// cell index).
std::vector<CellSet> components(const CellSet& s);

// Exact maximum Euclidean distance between cell centers.  Throws EmptySet.
double diameter(const CellSet& s);

// Maximum Euclidean norm over cell centers (0 for the empty set).
double max_center_norm(const CellSet& s);

// Binary container (run-length-encoded bit-set) + JSON sidecar with the
// grid geometry and a checksum.  `path` names the binary file; the sidecar
// is written next to it as path + ".json".
void save_cellset(const CellSet& s, const std::string& path);
CellSet load_cellset(const std::string& path);

// CSV export of cell centers (one row per cell, ascending index).
std::string cellset_centers_csv(const CellSet& s);

} // namespace cubicon

#endif
