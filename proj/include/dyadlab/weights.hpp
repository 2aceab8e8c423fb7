#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dyadlab/grid.hpp"

namespace dyadlab {

/// A claimed weak A-infinity character: |E|_s / |2Q|_s <= C (|E|/|Q|)^theta.
struct WeakAinftyClaim {
  double theta = 1.0;
  double C = 1.0;
};

/// Nonnegative density on the finest cells of a dense grid. Cells have unit
/// volume, so sigma(E) is the plain sum of densities over E.
class Weight {
 public:
  enum class Kind { Constant, Power, Custom };

  static Weight constant(const Grid& grid, double value = 1.0);
  /// |x - center|^gamma sampled at cell centers. A cell whose center is the
  /// singularity gets the mean of the 2^n samples at center +- 1/4 per axis.
  static Weight power(const Grid& grid, double gamma, const std::array<double, kMaxDim>& center);
  static Weight custom(const Grid& grid, std::vector<double> density, std::string label = "custom");
  static Weight indicator(const CellSet& set, std::string label = "indicator");
  /// Indicator of the cells with c0 < side/2.
  static Weight half_space(const Grid& grid);

  Weight with_claim(double theta, double C) const;

  const Grid& grid() const { return grid_; }
  Kind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  const std::optional<WeakAinftyClaim>& claim() const { return claim_; }

  double density(std::uint64_t idx) const { return density_[idx]; }
  double density(const Coords& c) const { return density_[grid_.linear_index(c)]; }
  const std::vector<double>& densities() const { return density_; }

  double sigma(const CellSet& e) const;
  double sigma_cube(const DyadicCube& q) const;

  /// sigma of the concentric double [a - s/2, a + 3s/2)^n of q, clipped to the
  /// root. Level-0 cubes take half of each neighbouring cell.
  double sigma_doubled(const DyadicCube& q, bool* clipped = nullptr) const;

 private:
  Weight(const Grid& grid, Kind kind, std::vector<double> density, std::string label);

  Grid grid_;
  Kind kind_ = Kind::Constant;
  std::vector<double> density_;
  std::string label_;
  std::optional<WeakAinftyClaim> claim_;
};

double sigma_measure(const Weight& w, const CellSet& e);

/// `constant [value=<v>]`, `power gamma=<g> center=<x0>,<x1>,...`,
/// `file <path>` (measure text format, one density per cell), `half-space`
/// or `cell <c0>,<c1>,...` (indicator of one cell).
Weight parse_weight_spec(std::string_view spec, const Grid& grid);

struct AinftyWitness {
  DyadicCube cube;
  std::vector<std::uint64_t> cells;  // E, linear indices
  double e_sigma = 0.0;
  double double_sigma = 0.0;
  double volume_ratio = 0.0;  // |E| / |Q|
  double ratio = 0.0;         // |E|_s / |2Q|_s (inf when the double is null)
  double bound = 0.0;         // C (|E|/|Q|)^theta
};

struct AinftyReport {
  std::uint64_t samples = 0;
  std::uint64_t violations = 0;
  std::uint64_t clipped_samples = 0;
  std::optional<WeakAinftyClaim> claim;
  std::vector<AinftyWitness> witnesses;  // first few violations, sample order
  double max_ratio = 0.0;
  double theta_hat = 0.0;  // largest grid theta whose fitted constant fits the reference
  double C_hat = 0.0;
  double C_reference = 0.0;  // claimed C, or 2^n without a claim
};

/// Samples cubes Q (uniform level, uniform position) and subsets E of Q.
/// Even samples take the m densest cells of Q (m = 2^u); odd samples take a
/// random union of dyadic subcubes. Sample i draws from Rng::stream(seed, i),
/// so the report does not depend on `threads`.
AinftyReport check_weak_ainfty(const Weight& w, std::uint64_t samples, std::uint64_t seed,
                               int threads = 1, std::size_t max_witnesses = 8);

}  // namespace dyadlab
