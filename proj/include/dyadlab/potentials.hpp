#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dyadlab/grid.hpp"
#include "dyadlab/measure_tree.hpp"

namespace dyadlab {

/// Exponents and truncation of every potential evaluation.
///
/// Dyadic operators sum cubes of level k in [level_min, min(level_max, J)];
/// the supercube tail (levels k > J, each cube carrying the total mass) is
/// added in closed form when `include_supercube_tail` is set, which requires
/// level_max >= J. Ball operators use radii 2^j for j in [level_min,
/// level_max]; with the tail flag they continue up to the radius that covers
/// the root cube and sum the rest geometrically.
struct PotentialParams {
  int dim = 1;
  double alpha = 0.5;
  double q = 1.0;
  int level_min = 0;
  int level_max = 0;
  bool include_supercube_tail = false;

  /// Levels 0..J of `grid`, tail off.
  static PotentialParams for_grid(const Grid& grid, double alpha, double q, bool tail = false);

  void validate() const;
  void validate_for(const Grid& grid) const;
};

enum class Operator { DyadicPotential, BallPotential, DyadicMaximal, BallMaximal, Shell };

std::string_view to_string(Operator op);
Operator parse_operator(std::string_view name);

/// Potential value and maximal value at one point, from one pass over the
/// levels.
struct PointValues {
  double potential = 0.0;
  double maximal = 0.0;
};

/// Geometric sum over k >= first_level of (mass * 2^{-k(n-alpha)})^q.
double geometric_tail_power(double mass, double exponent, double q, int first_level);

/// Evaluates all pointwise operators of one measure. Holds a reference to the
/// tree, which must outlive the evaluator. Const methods are safe to call
/// concurrently.
class PotentialEvaluator {
 public:
  PotentialEvaluator(const MeasureTree& tree, PotentialParams params);

  const MeasureTree& tree() const { return *tree_; }
  const PotentialParams& params() const { return params_; }
  const Grid& grid() const { return tree_->grid(); }

  /// (sum over dyadic Q containing x of (mu(Q)/l(Q)^{n-alpha})^q)^{1/q}.
  double dyadic_potential(const Coords& x) const { return dyadic_pair(x).potential; }
  /// sup over the same cubes of mu(Q)/l(Q)^{n-alpha}.
  double dyadic_maximal(const Coords& x) const { return dyadic_pair(x).maximal; }
  PointValues dyadic_pair(const Coords& x) const;

  /// mu(Q_k(x)) / 2^{k(n-alpha)}.
  double shell(int k, const Coords& x) const;

  /// mu(B(x, 2^j)); a cell belongs to the ball iff its center is within
  /// Euclidean distance 2^j of the center of cell x.
  double ball_mass(const Coords& x, int j) const;

  double ball_potential(const Coords& x) const { return ball_pair(x).potential; }
  double ball_maximal(const Coords& x) const { return ball_pair(x).maximal; }
  PointValues ball_pair(const Coords& x) const;

  double evaluate(Operator op, const Coords& x, int shell_level = 0) const;

  /// The q-th power contribution of the supercube tail (0 when disabled).
  double supercube_tail_power() const;

 private:
  void check_point(const Coords& x, const char* what) const;
  double ball_mass_unchecked(const Coords& x, int j) const;
  double ball_mass_rows(const Coords& x, unsigned __int128 r2) const;
  double ball_mass_atoms(const Coords& x, unsigned __int128 r2) const;
  double interval_mass_1d(std::uint64_t lo, std::uint64_t hi) const;
  double row_interval(std::uint64_t row, std::uint64_t lo, std::uint64_t hi) const;
  int covering_level() const;

  struct BallIndex;

  double scale(int level) const;
  PointValues combine(const std::vector<double>& terms, bool tail, double tail_mass,
                      int tail_first) const;

  const MeasureTree* tree_;
  PotentialParams params_;
  double exponent_;  // n - alpha
  std::uint64_t nonzero_cells_ = 0;
  std::vector<double> scales_;
  std::shared_ptr<BallIndex> index_;  // built on first ball query
};

/// Values on every finest cell in linear-index order.
struct Field {
  Grid grid;
  std::vector<double> values;

  double at(const Coords& c) const { return values[grid.linear_index(c)]; }
};

/// Evaluates `op` at every finest-cell center. Each point is independent, so
/// the result does not depend on `threads`.
Field potential_field(const PotentialEvaluator& eval, Operator op, int threads = 1,
                      int shell_level = 0);
Field potential_field(const MeasureTree& tree, const PotentialParams& params, Operator op,
                      int threads = 1, int shell_level = 0);

/// Potential and maximal fields of one flavor in a single pass.
std::pair<Field, Field> potential_and_maximal_fields(const PotentialEvaluator& eval,
                                                     bool ball_flavor, int threads = 1);

// Single-point conveniences.
double dyadic_potential(const MeasureTree& tree, const PotentialParams& p, const Coords& x);
double shell_function_g(const MeasureTree& tree, const PotentialParams& p, int k, const Coords& x);
double ball_potential_F(const MeasureTree& tree, const PotentialParams& p, const Coords& x);
double fractional_maximal_dyadic(const MeasureTree& tree, const PotentialParams& p, const Coords& x);
double fractional_maximal_ball(const MeasureTree& tree, const PotentialParams& p, const Coords& x);

/// CSV rows `c0[,c1[,c2]],value` with 17 significant digits.
void write_field_csv(std::ostream& out, const Field& field, const std::string& value_name = "value");

}  // namespace dyadlab
