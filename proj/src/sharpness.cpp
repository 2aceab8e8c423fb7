#include "dyadlab/sharpness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "dyadlab/potentials.hpp"
#include "parallel.hpp"

namespace dyadlab {

double SharpExample::annulus_cells(int j) const {
  if (j == 0) return 1.0;
  return (std::exp2(n) - 1.0) * std::exp2(n * (j - 1));
}

double SharpExample::annulus_density(int j) const {
  if (j == 0) return delta;
  return delta * std::exp2(j * exponent()) / annulus_cells(j);
}

int SharpExample::annulus_of(const Coords& x, int n) {
  std::uint64_t m = 0;
  for (int a = 0; a < n; ++a) m = std::max(m, x[a]);
  return static_cast<int>(std::bit_width(m));
}

double SharpExample::mass_of_Q(int k) const {
  double m = delta;
  for (int j = 1; j <= k; ++j) m += delta * std::exp2(j * exponent());
  return m;
}

double SharpExample::total_mass() const { return mass_of_Q(N); }

Grid SharpExample::grid() const {
  if (n * N > 62) throw Error("sharp example: the grid [0, 2^N)^n is not representable");
  return Grid(n, N);
}

SharpExample build_sharp_example(double epsilon, int n, double alpha) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw Error("build_sharp_example: epsilon must lie in (0, 1]");
  if (n < 1 || n > kMaxDim) throw Error("build_sharp_example: n must be 1, 2 or 3");
  if (!(alpha > 0.0 && alpha < n)) throw Error("build_sharp_example: alpha must satisfy 0 < alpha < n");
  SharpExample ex;
  ex.epsilon = epsilon;
  ex.n = n;
  ex.alpha = alpha;
  ex.delta = epsilon * (1.0 - std::exp2(alpha - n));
  ex.N = static_cast<int>(std::floor(2.0 / ex.delta));
  if (static_cast<std::uint64_t>(n) * ex.N <= 24) {
    const Grid g(n, ex.N);
    std::vector<double> cells(g.cell_count());
    std::vector<double> dens(ex.N + 1);
    for (int j = 0; j <= ex.N; ++j) dens[j] = ex.annulus_density(j);
    for (std::uint64_t i = 0; i < cells.size(); ++i)
      cells[i] = dens[SharpExample::annulus_of(g.coords_of(i), n)];
    ex.tree = MeasureTree::from_cell_masses(g, std::move(cells));
  }
  return ex;
}

double eval_A_closed_annulus(const SharpExample& ex, int k) {
  if (k < 0 || k > ex.N) throw Error("eval_A_closed: annulus index outside 0..N");
  const double d = ex.delta;
  if (k == 0) return d * (ex.N + 1);
  const int n = ex.n;
  const double e = ex.exponent();
  double s1 = 0.0, s2 = 0.0;
  for (int j = 1; j <= k; ++j) s1 += std::exp2(-j * e);
  for (int j = 1; j <= k - 1; ++j) s2 += std::exp2(-j * ex.alpha);
  const double two_n = std::exp2(n);
  const double s3 = (two_n - 2.0 + std::exp2(n - k * ex.alpha)) / (two_n - 1.0);
  return d * (s1 + s2 + s3 + (ex.N - k));
}

double eval_A_closed(const SharpExample& ex, const Coords& x) {
  const int k = SharpExample::annulus_of(x, ex.n);
  if (k > ex.N) throw Error("eval_A_closed: point outside Q^N");
  return eval_A_closed_annulus(ex, k);
}

namespace {

struct DirectTables {
  std::vector<double> f;  // per cell
  std::vector<double> w;  // 2^{L(alpha-n)}, L = 0..N
};

DirectTables direct_tables(const SharpExample& ex) {
  if (!ex.dense()) throw Error("eval_A_direct: needs the dense per-cell example");
  DirectTables t;
  t.f = ex.tree->cell_masses();
  t.w.resize(ex.N + 1);
  for (int L = 0; L <= ex.N; ++L) t.w[L] = std::exp2(L * (ex.alpha - ex.n));
  return t;
}

double direct_sum(const SharpExample& ex, const DirectTables& t, const Coords& x) {
  const std::uint64_t side = std::uint64_t{1} << ex.N;
  double s = 0.0;
  std::uint64_t i = 0;
  DyadicCube p{0, Coords{}};
  const std::uint64_t s1 = ex.n >= 2 ? side : 1, s2 = ex.n >= 3 ? side : 1;
  for (std::uint64_t c2 = 0; c2 < s2; ++c2) {
    p.coords[2] = c2;
    for (std::uint64_t c1 = 0; c1 < s1; ++c1) {
      p.coords[1] = c1;
      for (std::uint64_t c0 = 0; c0 < side; ++c0, ++i) {
        p.coords[0] = c0;
        s += t.f[i] * t.w[common_ancestor_level(p, x)];
      }
    }
  }
  return s;
}

}  // namespace

double eval_A_direct(const SharpExample& ex, const Coords& x) {
  const DirectTables t = direct_tables(ex);
  if (!ex.tree->grid().contains_cell(x)) throw Error("eval_A_direct: point outside Q^N");
  return direct_sum(ex, t, x);
}

std::vector<double> eval_A_direct_field(const SharpExample& ex, int threads) {
  const DirectTables t = direct_tables(ex);
  const Grid& g = ex.tree->grid();
  std::vector<double> out(g.cell_count());
  detail::parallel_for(out.size(), threads,
                       [&](std::uint64_t i) { out[i] = direct_sum(ex, t, g.coords_of(i)); });
  return out;
}

SharpnessReport sharpness_report(const SharpExample& ex, int threads) {
  SharpnessReport r;
  r.epsilon = ex.epsilon;
  r.delta = ex.delta;
  r.alpha = ex.alpha;
  r.n = ex.n;
  r.N = ex.N;
  r.dense = ex.dense();

  for (int k = 0; k <= ex.N; ++k) r.annulus_values.push_back(eval_A_closed_annulus(ex, k));
  for (int k = 2; k <= ex.N; ++k)
    if (!(r.annulus_values[k] < r.annulus_values[k - 1])) r.annulus_decreasing = false;
  r.A_Q0 = r.annulus_values[0];
  r.q0_exact = r.A_Q0 == ex.delta * (ex.N + 1);

  // Q^0 is the single cell at the origin; its dyadic ancestors are the Q^k.
  const double e = ex.exponent();
  for (int k = 0; k <= ex.N; ++k)
    r.dyadic_maximal_Q0 = std::max(r.dyadic_maximal_Q0, ex.mass_of_Q(k) / std::exp2(k * e));
  r.ball_maximal_Q0 = std::numeric_limits<double>::quiet_NaN();
  std::optional<PotentialEvaluator> eval;
  if (ex.dense()) {
    eval.emplace(*ex.tree, PotentialParams::for_grid(ex.tree->grid(), ex.alpha, 1.0, true));
    r.dyadic_maximal_Q0 = eval->dyadic_maximal(Coords{});
    r.ball_maximal_Q0 = eval->ball_maximal(Coords{});
  }
  r.a_dyadic = r.dyadic_maximal_Q0 <= ex.epsilon;
  r.a_ball = r.ball_maximal_Q0 <= ex.epsilon * (1.0 + 1e-9);
  r.b_containment = r.A_Q0 > 2.0 && r.dyadic_maximal_Q0 <= ex.epsilon;

  // Smallest k0 with {A > 1} inside Q^{k0}.
  r.k0 = 0;
  for (int k = 0; k <= ex.N; ++k)
    if (r.annulus_values[k] > 1.0) r.k0 = k;
  r.k0_bound = 4.0 / ex.epsilon;
  r.k0_within_bound = r.k0 <= r.k0_bound;

  if (ex.dense()) {
    const Grid& g = ex.tree->grid();
    const Field maximal = potential_field(*eval, Operator::DyadicMaximal, threads);
    std::uint64_t good = 0, level = 0;
    int outside_k0 = 0;
    r.comparability_min = std::numeric_limits<double>::infinity();
    r.comparability_max = 0.0;
    const PotentialParams tail = PotentialParams::for_grid(g, ex.alpha, 1.0, true);
    const PotentialEvaluator pot(*ex.tree, tail);
    for (std::uint64_t i = 0; i < g.cell_count(); ++i) {
      const Coords c = g.coords_of(i);
      const int k = SharpExample::annulus_of(c, ex.n);
      const double A = r.annulus_values[k];
      if (A > 1.0) {
        ++level;
        if (k > r.k0) ++outside_k0;
      }
      if (A > 2.0 && maximal.values[i] <= ex.epsilon) ++good;
      const double ratio = A / pot.dyadic_potential(c);
      r.comparability_min = std::min(r.comparability_min, ratio);
      r.comparability_max = std::max(r.comparability_max, ratio);
    }
    r.good_cells = static_cast<double>(good);
    r.level_cells = static_cast<double>(level);
    r.c_containment = outside_k0 == 0;
    r.cell_scan = true;
  } else {
    // Annulus counts; the good set is bounded below by Q^0 alone.
    r.level_cells = 0.0;
    for (int k = 0; k <= ex.N; ++k)
      if (r.annulus_values[k] > 1.0) r.level_cells += ex.annulus_cells(k);
    r.good_cells = r.b_containment ? 1.0 : 0.0;
    r.c_containment = true;
    for (int k = r.k0 + 1; k <= ex.N; ++k)
      if (r.annulus_values[k] > 1.0) r.c_containment = false;
    r.comparability_min = r.comparability_max = 1.0 - std::exp2(-e);
  }
  r.ratio = r.level_cells > 0.0 ? r.good_cells / r.level_cells : 0.0;
  r.implied_lower = std::exp2(-ex.n * r.k0);
  r.d_ratio = r.ratio >= r.implied_lower;
  return r;
}

DecayFit fit_sharpness_decay(const std::vector<std::pair<double, double>>& fit_points,
                             std::optional<std::pair<double, double>> heldout) {
  if (fit_points.size() < 2) throw Error("fit_sharpness_decay: need at least two points");
  DecayFit fit;
  fit.points = fit_points;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [eps, ratio] : fit_points) {
    if (!(ratio > 0.0) || !(eps > 0.0)) throw Error("fit_sharpness_decay: ratios and eps must be > 0");
    const double x = 1.0 / eps, y = -std::log(ratio);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double m = static_cast<double>(fit_points.size());
  fit.c2 = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  fit.c1 = std::numeric_limits<double>::infinity();
  for (auto [eps, ratio] : fit_points) fit.c1 = std::min(fit.c1, ratio * std::exp(fit.c2 / eps));
  fit.holds_on_fit = fit.c1 > 0.0 && fit.c2 > 0.0;
  for (auto [eps, ratio] : fit_points)
    if (ratio < fit.c1 * std::exp(-fit.c2 / eps) * (1.0 - 1e-12)) fit.holds_on_fit = false;
  if (heldout) {
    fit.heldout = heldout;
    fit.heldout_bound = fit.c1 * std::exp(-fit.c2 / heldout->first);
    fit.holds_heldout = heldout->second >= fit.heldout_bound;
  }
  return fit;
}

}  // namespace dyadlab
