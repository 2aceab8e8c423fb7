#include "dyadlab/grid.hpp"

#include <algorithm>
#include <numeric>

namespace dyadlab {

Grid::Grid(int dim, int root_level) : dim_(dim), root_level_(root_level) {
  if (dim < 1 || dim > kMaxDim)
    throw Error("grid: dimension must be 1, 2 or 3, got " + std::to_string(dim));
  if (root_level < 0 || root_level * dim > 62)
    throw Error("grid: root level " + std::to_string(root_level) +
                " out of range for dimension " + std::to_string(dim));
}

void Grid::require_dense(const char* what) const {
  if (!dense_ok())
    throw Error(std::string(what) + ": grid with 2^" +
                std::to_string(dim_ * root_level_) +
                " cells exceeds the dense cell cap 2^24");
}

bool Grid::contains(const DyadicCube& q) const {
  if (q.level < 0 || q.level > root_level_) return false;
  const std::uint64_t n = side_at(q.level);
  for (int i = 0; i < kMaxDim; ++i) {
    if (i < dim_ ? q.coords[i] >= n : q.coords[i] != 0) return false;
  }
  return true;
}

void Grid::check_cube(const DyadicCube& q, const char* what) const {
  if (!contains(q))
    throw Error(std::string(what) + ": cube " + to_string(q, dim_) +
                " is outside the root lattice");
}

std::vector<DyadicCube> Grid::children(const DyadicCube& q) const {
  std::vector<DyadicCube> out;
  if (q.level == 0) return out;
  const int k = 1 << dim_;
  out.reserve(k);
  for (int off = 0; off < k; ++off) {
    DyadicCube c{q.level - 1, {}};
    for (int i = 0; i < dim_; ++i) c.coords[i] = 2 * q.coords[i] + ((off >> i) & 1);
    out.push_back(c);
  }
  // offsets enumerate axis 0 fastest, which is ascending linear order
  return out;
}

int common_ancestor_level(const Grid& grid, const DyadicCube& a, const Coords& x) {
  grid.check_cube(a, "common_ancestor_level");
  if (!grid.contains_cell(x))
    throw Error("common_ancestor_level: cell " + to_string(DyadicCube{0, x}, grid.dim()) +
                " is outside the root lattice");
  return common_ancestor_level(a, x);
}

std::string to_string(const DyadicCube& q, int dim) {
  std::string s = "L" + std::to_string(q.level) + "(";
  for (int i = 0; i < dim; ++i) {
    if (i) s += ',';
    s += std::to_string(q.coords[i]);
  }
  return s + ")";
}

CellSet::CellSet(const Grid& grid) : grid_(grid) {
  grid.require_dense("CellSet");
  bits_.assign(grid.cell_count(), 0);
}

void CellSet::insert_cube(const DyadicCube& q) {
  grid_.check_cube(q, "CellSet::insert_cube");
  const std::uint64_t s = q.side();
  const int d = grid_.dim();
  const std::uint64_t ny = d > 1 ? s : 1, nz = d > 2 ? s : 1;
  for (std::uint64_t z = 0; z < nz; ++z)
    for (std::uint64_t y = 0; y < ny; ++y) {
      Coords c{q.lower(0), d > 1 ? q.lower(1) + y : 0, d > 2 ? q.lower(2) + z : 0};
      const std::uint64_t base = grid_.linear_index(c);
      std::fill_n(bits_.begin() + static_cast<std::ptrdiff_t>(base), s, std::uint8_t{1});
    }
}

std::uint64_t CellSet::count() const {
  return static_cast<std::uint64_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void CellSet::check_same_grid(const CellSet& other) const {
  if (!(grid_ == other.grid_)) throw Error("CellSet: operands live on different grids");
}

CellSet& CellSet::operator|=(const CellSet& other) {
  check_same_grid(other);
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
  return *this;
}

CellSet& CellSet::operator&=(const CellSet& other) {
  check_same_grid(other);
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] &= other.bits_[i];
  return *this;
}

CellSet CellSet::complement() const {
  CellSet out = *this;
  for (auto& b : out.bits_) b ^= 1;
  return out;
}

}  // namespace dyadlab
