#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dyadlab/grid.hpp"
#include "dyadlab/measure_tree.hpp"

namespace dyadlab {

/// The radial step function f on [0, 2^N)^n: value delta on Q^0 = [0,1)^n and
/// delta * 2^{j(n-alpha)} / |Q^j \ Q^{j-1}| on the annulus Q^j \ Q^{j-1},
/// where Q^j = [0, 2^j)^n, delta = eps (1 - 2^{alpha-n}) and N = floor(2/delta).
///
/// The per-cell tree exists only when 2^{nN} <= 2^24; otherwise the example
/// is annulus-implicit and only annulus-indexed quantities are available.
struct SharpExample {
  double epsilon = 0.0;
  int n = 1;
  double alpha = 0.5;
  double delta = 0.0;
  int N = 0;
  std::optional<MeasureTree> tree;

  bool dense() const { return tree.has_value(); }
  double exponent() const { return n - alpha; }

  /// Density of f on annulus j (j = 0 is Q^0).
  double annulus_density(int j) const;
  /// Unit cells in annulus j.
  double annulus_cells(int j) const;
  /// 0 on Q^0, k on Q^k \ Q^{k-1}.
  static int annulus_of(const Coords& x, int n);

  double total_mass() const;
  /// mu(Q^k) in closed form.
  double mass_of_Q(int k) const;
  Grid grid() const;
};

SharpExample build_sharp_example(double epsilon, int n, double alpha);

/// Closed form of the auxiliary potential on annulus k:
/// k = 0: delta (N + 1);
/// k >= 1: delta (sum_{j=1}^k 2^{-j(n-alpha)} + sum_{j=1}^{k-1} 2^{-j alpha}
///                + (2^n - 2 + 2^{n - k alpha}) / (2^n - 1) + (N - k)).
double eval_A_closed_annulus(const SharpExample& ex, int k);
double eval_A_closed(const SharpExample& ex, const Coords& x);

/// Literal sum over every unit cell P of f(P) * l(P_x)^{alpha-n}, P_x the
/// smallest dyadic cube holding P and x. Dense examples only.
double eval_A_direct(const SharpExample& ex, const Coords& x);
/// eval_A_direct at every cell, linear order.
std::vector<double> eval_A_direct_field(const SharpExample& ex, int threads = 1);

struct SharpnessReport {
  double epsilon = 0.0, delta = 0.0, alpha = 0.0;
  int n = 0, N = 0;
  bool dense = false;

  std::vector<double> annulus_values;  // closed form, k = 0..N
  bool annulus_decreasing = true;      // strictly, for k >= 1
  double A_Q0 = 0.0;
  bool q0_exact = false;  // A_Q0 == delta (N + 1)

  // (a) maximal operators of f on Q^0 against eps
  double dyadic_maximal_Q0 = 0.0;
  double ball_maximal_Q0 = 0.0;  // NaN when the example is implicit
  bool a_dyadic = false;
  bool a_ball = false;

  // (b) Q^0 in {A > 2, M <= eps}
  bool b_containment = false;

  // (c) {A > 1} in Q^{k0}
  int k0 = 0;
  bool c_containment = false;
  double k0_bound = 0.0;  // 4 / eps
  bool k0_within_bound = false;

  // (d) |{A > 2, M <= eps}| / |{A > 1}| >= 2^{-n k0}
  double good_cells = 0.0;
  double level_cells = 0.0;
  double ratio = 0.0;
  double implied_lower = 0.0;
  bool d_ratio = false;
  bool cell_scan = false;  // counts from a per-cell scan (dense) or annuli

  // A against the dyadic q = 1 potential with supercube tail
  double comparability_min = 0.0;
  double comparability_max = 0.0;

  /// (a) dyadic, (b), (c), (d) and Q^0 exactness.
  bool containments_pass() const {
    return q0_exact && a_dyadic && b_containment && c_containment && d_ratio;
  }
};

SharpnessReport sharpness_report(const SharpExample& ex, int threads = 1);

/// ratio(eps) >= c1 exp(-c2 / eps): c2 is the least-squares slope of
/// -ln(ratio) against 1/eps, c1 the largest constant valid on every fit point.
struct DecayFit {
  double c1 = 0.0;
  double c2 = 0.0;
  std::vector<std::pair<double, double>> points;  // (eps, ratio)
  bool holds_on_fit = false;
  std::optional<std::pair<double, double>> heldout;
  double heldout_bound = 0.0;
  bool holds_heldout = false;
};

DecayFit fit_sharpness_decay(const std::vector<std::pair<double, double>>& fit_points,
                             std::optional<std::pair<double, double>> heldout = std::nullopt);

}  // namespace dyadlab
