#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "dyadlab/grid.hpp"

namespace dyadlab {

enum class DecompositionFlavor { DyadicMaximal, Whitney };

std::string_view to_string(DecompositionFlavor f);

/// Disjoint dyadic cubes whose union is `source`, sorted by (level, coords).
struct LevelSetDecomposition {
  DecompositionFlavor flavor = DecompositionFlavor::DyadicMaximal;
  CellSet source;
  std::vector<DyadicCube> cubes;
};

/// Maximal dyadic cubes contained in G: each cube lies in G, its parent does
/// not.
LevelSetDecomposition dyadic_maximal_decomposition(const CellSet& G);

/// Top-down: a cube Q inside G is accepted when diam(Q) <= dist(Q, G^c),
/// otherwise split. G^c includes everything outside the root cube. Unit
/// cells in G are always accepted.
LevelSetDecomposition whitney_decomposition(const CellSet& G);

/// Squared Euclidean distance between the closed cube q and the closest
/// cell of G^c (outside-root included), in cell units. Exact.
std::uint64_t squared_distance_to_complement(const CellSet& G, const DyadicCube& q);

struct DecompositionReport {
  bool contained = true;      // every cube lies inside the source set
  bool disjoint = true;
  bool tiles_exactly = true;  // disjoint and the union equals the source
  std::uint64_t source_cells = 0;
  std::uint64_t covered_cells = 0;  // sum of cube volumes
  std::uint64_t max_overlap_of_doubles = 0;
  std::uint64_t overlap_bound = 0;  // 4^n
  bool parent_maximality = true;
  std::uint64_t ratio_cubes = 0;  // cubes of level >= 1
  double dist_ratio_min = 0.0;    // dist(Q, G^c) / diam(Q) over level >= 1
  double dist_ratio_max = 0.0;
  std::uint64_t unit_cells = 0;
  double unit_dist_ratio_min = 0.0;
  double unit_dist_ratio_max = 0.0;
};

/// Recomputes every property from the cube list, cell-exactly. Doubles are
/// clipped to the root and counted on the half-cell lattice.
DecompositionReport verify_decomposition(const LevelSetDecomposition& d);

/// `level,c0[,c1[,c2]]` per cube.
void write_decomposition_csv(std::ostream& out, const LevelSetDecomposition& d);

}  // namespace dyadlab
