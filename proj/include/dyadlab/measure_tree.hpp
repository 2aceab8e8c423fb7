#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dyadlab/grid.hpp"

namespace dyadlab {

struct Atom {
  Coords cell{};
  double mass = 0.0;
};

/// Nonnegative measure on the finest cells of a grid, with the mass of every
/// dyadic cube aggregated bottom-up at construction. Immutable afterwards, so
/// concurrent reads are safe.
///
/// Levels are stored densely when the grid has at most 2^24 cells, otherwise
/// as sorted (index, mass) runs holding only nonzero cubes. Both layouts sum
/// children in ascending linear-index order, so they agree bit for bit.
class MeasureTree {
 public:
  MeasureTree() = default;

  /// Atoms in the same cell accumulate. Rejects negative or non-finite
  /// masses and cells outside the root cube.
  static MeasureTree build(const Grid& grid, std::span<const Atom> atoms);

  /// One mass per finest cell, in linear-index order.
  static MeasureTree from_cell_masses(const Grid& grid, std::vector<double> masses);

  const Grid& grid() const { return grid_; }
  int dim() const { return grid_.dim(); }
  int root_level() const { return grid_.root_level(); }
  bool is_dense() const { return dense_; }

  /// mu(Q); throws if Q is outside the lattice.
  double mass(const DyadicCube& q) const;

  /// Unchecked lookup by level and linear index at that level.
  double mass_at(int level, std::uint64_t idx) const;

  double total_mass() const { return mass_at(grid_.root_level(), 0); }

  /// Nonzero cells in ascending linear order.
  std::vector<Atom> atoms() const;

  /// Per-cell masses (dense grids only).
  std::vector<double> cell_masses() const;

  std::size_t nonzero_cells() const;

  MeasureTree scaled(double c) const;

  /// mu restricted to the cells of `keep` (dense grids only).
  MeasureTree restricted(const CellSet& keep) const;

 private:
  struct SparseLevel {
    std::vector<std::uint64_t> index;  // ascending
    std::vector<double> mass;
    std::unordered_map<std::uint64_t, double> lookup;
  };

  void aggregate();

  Grid grid_;
  bool dense_ = true;
  std::vector<std::vector<double>> dense_levels_;
  std::vector<SparseLevel> sparse_levels_;
};

/// Parses the measure text format:
///   n=<dim> J=<root_level>
///   <c0> [<c1> [<c2>]] <mass>
/// Blank lines and lines starting with '#' are ignored.
MeasureTree read_measure(std::istream& in, const std::string& source_name = "<input>");
MeasureTree read_measure_file(const std::string& path);
void write_measure(std::ostream& out, const MeasureTree& tree);

}  // namespace dyadlab
