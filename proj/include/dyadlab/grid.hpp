#pragma once

#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyadlab {

/// Raised for precondition violations and malformed input anywhere in the
/// library. The message names the offending operation.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxDim = 3;

/// Largest number of finest cells stored densely (per-cell arrays, fields,
/// cell sets).
inline constexpr std::uint64_t kDenseCellCap = std::uint64_t{1} << 24;

/// Integer lattice coordinates; axes >= dim are ignored and kept at 0.
using Coords = std::array<std::uint64_t, kMaxDim>;

/// A cube of the dyadic lattice: side 2^level in cell units, occupying
/// [coords[i] * 2^level, (coords[i] + 1) * 2^level) on each axis.
struct DyadicCube {
  int level = 0;
  Coords coords{};

  DyadicCube parent() const {
    DyadicCube p{level + 1, coords};
    for (auto& c : p.coords) c >>= 1;
    return p;
  }

  std::uint64_t side() const { return std::uint64_t{1} << level; }

  /// Lower corner in cell units.
  std::uint64_t lower(int axis) const { return coords[axis] << level; }

  bool contains_cell(const Coords& cell) const {
    for (int i = 0; i < kMaxDim; ++i)
      if ((cell[i] >> level) != coords[i]) return false;
    return true;
  }

  bool contains(const DyadicCube& other) const {
    if (other.level > level) return false;
    const int shift = level - other.level;
    for (int i = 0; i < kMaxDim; ++i)
      if ((other.coords[i] >> shift) != coords[i]) return false;
    return true;
  }

  friend auto operator<=>(const DyadicCube&, const DyadicCube&) = default;
};

/// The ambient root cube [0, 2^J)^n with unit finest cells.
class Grid {
 public:
  Grid() = default;
  Grid(int dim, int root_level);

  int dim() const { return dim_; }
  int root_level() const { return root_level_; }

  /// Number of cubes per axis at `level`.
  std::uint64_t side_at(int level = 0) const {
    return std::uint64_t{1} << (root_level_ - level);
  }
  std::uint64_t cube_count(int level = 0) const {
    return std::uint64_t{1} << (dim_ * (root_level_ - level));
  }
  std::uint64_t cell_count() const { return cube_count(0); }

  bool dense_ok() const { return cell_count() <= kDenseCellCap; }
  void require_dense(const char* what) const;

  bool contains(const DyadicCube& q) const;
  bool contains_cell(const Coords& c) const { return contains(DyadicCube{0, c}); }
  void check_cube(const DyadicCube& q, const char* what) const;

  /// Row-major index with axis 0 fastest.
  std::uint64_t linear_index(const Coords& c, int level = 0) const {
    const int shift = root_level_ - level;
    std::uint64_t idx = 0;
    for (int i = dim_ - 1; i >= 0; --i) idx = (idx << shift) | c[i];
    return idx;
  }
  std::uint64_t linear_index(const DyadicCube& q) const {
    return linear_index(q.coords, q.level);
  }

  Coords coords_of(std::uint64_t idx, int level = 0) const {
    const int shift = root_level_ - level;
    const std::uint64_t mask = (std::uint64_t{1} << shift) - 1;
    Coords c{};
    for (int i = 0; i < dim_; ++i) {
      c[i] = idx & mask;
      idx >>= shift;
    }
    return c;
  }

  DyadicCube root() const { return DyadicCube{root_level_, Coords{}}; }

  /// The level-`level` cube containing cell `c`.
  DyadicCube ancestor(const Coords& c, int level) const {
    DyadicCube q{level, c};
    for (int i = 0; i < dim_; ++i) q.coords[i] >>= level;
    return q;
  }

  /// All children of `q` in ascending linear-index order.
  std::vector<DyadicCube> children(const DyadicCube& q) const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int dim_ = 1;
  int root_level_ = 0;
};

/// Level of the smallest dyadic cube containing both `a` and the finest
/// cell `x`.
inline int common_ancestor_level(const DyadicCube& a, const Coords& x) {
  std::uint64_t diff = 0;
  for (int i = 0; i < kMaxDim; ++i) diff |= (x[i] >> a.level) ^ a.coords[i];
  return a.level + static_cast<int>(std::bit_width(diff));
}

/// Range-checked form.
int common_ancestor_level(const Grid& grid, const DyadicCube& a,
                          const Coords& x);

std::string to_string(const DyadicCube& q, int dim);

/// Boolean membership over the finest cells of a dense grid.
class CellSet {
 public:
  CellSet() = default;
  explicit CellSet(const Grid& grid);

  const Grid& grid() const { return grid_; }
  std::uint64_t size() const { return bits_.size(); }

  bool contains(std::uint64_t idx) const { return bits_[idx] != 0; }
  bool contains(const Coords& c) const { return contains(grid_.linear_index(c)); }
  void insert(std::uint64_t idx) { bits_[idx] = 1; }
  void insert(const Coords& c) { insert(grid_.linear_index(c)); }
  void erase(std::uint64_t idx) { bits_[idx] = 0; }
  void insert_cube(const DyadicCube& q);

  std::uint64_t count() const;
  bool empty() const { return count() == 0; }

  CellSet& operator|=(const CellSet& other);
  CellSet& operator&=(const CellSet& other);
  CellSet complement() const;

  friend CellSet operator|(CellSet a, const CellSet& b) { return a |= b; }
  friend CellSet operator&(CellSet a, const CellSet& b) { return a &= b; }
  friend bool operator==(const CellSet&, const CellSet&) = default;

  const std::vector<std::uint8_t>& bits() const { return bits_; }

 private:
  void check_same_grid(const CellSet& other) const;

  Grid grid_;
  std::vector<std::uint8_t> bits_;
};

}  // namespace dyadlab
