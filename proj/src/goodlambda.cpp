#include "dyadlab/goodlambda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dyadlab/rng.hpp"
#include "parallel.hpp"

namespace dyadlab {

std::string_view to_string(Flavor f) { return f == Flavor::Ball ? "ball" : "dyadic"; }

Flavor parse_flavor(std::string_view name) {
  if (name == "dyadic") return Flavor::Dyadic;
  if (name == "ball") return Flavor::Ball;
  throw Error("unknown operator flavor '" + std::string(name) + "' (dyadic | ball)");
}

LabFields compute_fields(const MeasureTree& tree, const PotentialParams& params, Flavor flavor,
                         int threads) {
  const PotentialEvaluator eval(tree, params);
  auto [pot, max] = potential_and_maximal_fields(eval, flavor == Flavor::Ball, threads);
  return LabFields{tree.grid(), params, flavor, std::move(pot.values), std::move(max.values)};
}

std::vector<double> positive_quantiles(const std::vector<double>& values, const std::vector<double>& probs) {
  std::vector<double> pos;
  for (double v : values)
    if (v > 0.0) pos.push_back(v);
  if (pos.empty()) return {};
  std::sort(pos.begin(), pos.end());
  std::vector<double> out;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("quantile probabilities must lie in [0, 1]");
    out.push_back(pos[static_cast<std::size_t>(std::floor(p * static_cast<double>(pos.size() - 1)))]);
  }
  return out;
}

double theorem_constant(double alpha, double q, double eps) {
  return std::exp2(-(alpha / std::pow(eps, q)) * (std::exp2(q) - 1.0));
}

long long good_m(double q, double eps) {
  return static_cast<long long>(std::floor((std::exp2(q) - 1.0) / std::pow(eps, q) - 1.0));
}

void GoodLambdaQuery::validate() const {
  if (!(lambda > 0.0)) throw Error("good-lambda query: lambda must be > 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error("good-lambda query: epsilon must lie in (0, 1)");
  if (!(tau > 1.0)) throw Error("good-lambda query: tau must be > 1");
}

namespace {

void check_fields(const LabFields& f, const Weight& w, const char* what) {
  if (!(f.grid == w.grid())) throw Error(std::string(what) + ": weight and fields live on different grids");
  if (f.potential.size() != f.grid.cell_count() || f.maximal.size() != f.grid.cell_count())
    throw Error(std::string(what) + ": fields are incomplete");
}

}  // namespace

GoodLambdaRow good_lambda_ratio(const LabFields& fields, const Weight& w, const GoodLambdaQuery& query) {
  query.validate();
  check_fields(fields, w, "good_lambda_ratio");
  GoodLambdaRow row;
  row.epsilon = query.epsilon;
  row.lambda = query.lambda;
  row.tau = query.tau;
  const double q = fields.params.q;
  row.theorem_bound = theorem_constant(fields.params.alpha, q, query.epsilon);
  row.m = good_m(q, query.epsilon);
  const double hi = query.tau * query.lambda;
  const double lo_max = query.epsilon * query.lambda;
  for (std::size_t i = 0; i < fields.potential.size(); ++i) {
    const double t = fields.potential[i];
    if (t > query.lambda) {
      row.denominator += w.density(i);
      ++row.denominator_cells;
      if (t > hi && fields.maximal[i] <= lo_max) {
        row.numerator += w.density(i);
        ++row.numerator_cells;
      }
    }
  }
  row.skipped = !(row.denominator > 0.0);
  row.ratio = row.skipped ? 0.0 : row.numerator / row.denominator;
  return row;
}

std::vector<double> dyadic_eps_grid(int k) {
  std::vector<double> g;
  for (int i = 1; i <= k; ++i) g.push_back(std::exp2(-i));
  return g;
}

SweepReport epsilon_sweep(const LabFields& fields, const Weight& w, const std::vector<double>& eps_grid,
                          double C_cap, double tau, const std::vector<double>& quantiles) {
  check_fields(fields, w, "epsilon_sweep");
  if (eps_grid.empty()) throw Error("epsilon_sweep: empty eps grid");
  if (!(C_cap > 0.0)) throw Error("epsilon_sweep: C_cap must be > 0");
  SweepReport rep;
  rep.C_cap = C_cap;
  const std::vector<double> lambdas = positive_quantiles(fields.potential, quantiles);
  const double q = fields.params.q;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double eps : eps_grid) {
    for (double lambda : lambdas) {
      GoodLambdaRow row = good_lambda_ratio(fields, w, {lambda, eps, tau});
      if (!row.skipped) {
        rep.inconclusive = false;
        rep.fitted_cap = std::max(rep.fitted_cap, row.ratio / row.theorem_bound);
        if (row.ratio > C_cap * row.theorem_bound * (1.0 + 1e-12)) rep.within_cap = false;
        if (row.ratio > 0.0) {
          const double x = 1.0 / std::pow(eps, q), y = std::log2(row.ratio);
          sx += x, sy += y, sxx += x * x, sxy += x * y;
          ++rep.fit_rows;
        }
      }
      rep.rows.push_back(row);
    }
  }
  if (rep.inconclusive) rep.within_cap = false;
  const double m = static_cast<double>(rep.fit_rows);
  if (rep.fit_rows >= 2 && m * sxx - sx * sx > 0.0) {
    rep.has_fit = true;
    rep.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    rep.intercept = (sy - rep.slope * sx) / m;
    rep.fitted_c = -rep.slope;
    rep.fitted_C = std::exp2(rep.intercept);
  }
  return rep;
}

std::vector<double> default_cprime_grid() {
  std::vector<double> g{0.0, 0.25, 0.5};
  for (int k = 0; k <= 16; ++k) g.push_back(std::exp2(k));
  return g;
}

GoodTauReport good_tau_check(const LabFields& fields, const Weight& w, const std::vector<double>& eps_grid,
                             const std::vector<double>& cprime_grid, const std::vector<double>& quantiles) {
  check_fields(fields, w, "good_tau_check");
  if (eps_grid.empty() || cprime_grid.empty()) throw Error("good_tau_check: grids must be nonempty");
  const double q = fields.params.q;
  std::vector<double> tq(fields.potential.size()), mq(fields.maximal.size());
  for (std::size_t i = 0; i < tq.size(); ++i) {
    tq[i] = std::pow(fields.potential[i], q);
    mq[i] = std::pow(fields.maximal[i], q);
  }
  const std::vector<double> lambdas = positive_quantiles(tq, quantiles);
  GoodTauReport rep;
  rep.all_found = true;
  for (double eps : eps_grid) {
    if (!(eps > 0.0 && eps < 1.0)) throw Error("good_tau_check: epsilon must lie in (0, 1)");
    GoodTauEps e;
    e.epsilon = eps;
    e.lambdas = lambdas;
    std::vector<double> denom(lambdas.size(), 0.0);
    for (std::size_t l = 0; l < lambdas.size(); ++l)
      for (std::size_t i = 0; i < tq.size(); ++i)
        if (tq[i] > lambdas[l]) denom[l] += w.density(i);
    for (double d : denom) {
      if (d > 0.0) rep.inconclusive = false;
      else ++e.skipped_lambdas;
    }
    for (double cp : cprime_grid) {
      std::vector<double> ratios(lambdas.size(), 0.0);
      bool ok = true;
      for (std::size_t l = 0; l < lambdas.size(); ++l) {
        if (!(denom[l] > 0.0)) continue;
        const double hi = (1.0 + cp * eps) * lambdas[l];
        const double mlim = eps * lambdas[l];
        double num = 0.0;
        for (std::size_t i = 0; i < tq.size(); ++i)
          if (tq[i] > hi && mq[i] <= mlim) num += w.density(i);
        ratios[l] = num / denom[l];
        if (ratios[l] > 0.5) ok = false;
      }
      if (ok) {
        e.cprime = cp;
        e.ratios_at_cprime = std::move(ratios);
        break;
      }
    }
    if (e.cprime) rep.max_cprime = std::max(rep.max_cprime, *e.cprime);
    else rep.all_found = false;
    rep.per_eps.push_back(std::move(e));
  }
  if (rep.inconclusive) rep.all_found = false;
  return rep;
}

std::string_view to_string(NormStatus s) {
  switch (s) {
    case NormStatus::Ok: return "ok";
    case NormStatus::Trivial: return "trivial";
    case NormStatus::Violation: return "violation";
  }
  return "?";
}

NormComparison norm_comparison(const LabFields& fields, const Weight& w, double p) {
  check_fields(fields, w, "norm_comparison");
  if (!(p > 0.0) || !std::isfinite(p)) throw Error("norm_comparison: p must be finite and > 0");
  NormComparison out;
  out.p = p;
  // Neumaier sums: the ratio should not drift with the size of the grid.
  struct Sum {
    double s = 0.0, c = 0.0;
    void add(double v) {
      const double t = s + v;
      c += std::fabs(s) >= std::fabs(v) ? (s - t) + v : (v - t) + s;
      s = t;
    }
    double value() const { return s + c; }
  } lsum, rsum;
  // Divide by a power of two near the largest value first, so that mu -> 2 mu
  // leaves every pow() argument bit-identical.
  double top = 0.0;
  for (std::size_t i = 0; i < fields.potential.size(); ++i)
    top = std::max({top, fields.potential[i], fields.maximal[i]});
  const int shift = top > 0.0 && std::isfinite(top) ? std::ilogb(top) : 0;
  for (std::size_t i = 0; i < fields.potential.size(); ++i) {
    const double s = w.density(i);
    if (s == 0.0) continue;
    lsum.add(s * std::pow(std::ldexp(fields.potential[i], -shift), p));
    rsum.add(s * std::pow(std::ldexp(fields.maximal[i], -shift), p));
  }
  const double lhs = lsum.value(), rhs = rsum.value();
  out.lhs_norm = std::pow(lhs, 1.0 / p) * std::exp2(shift);
  out.rhs_norm = std::pow(rhs, 1.0 / p) * std::exp2(shift);
  if (out.lhs_norm == 0.0 && out.rhs_norm == 0.0) {
    out.status = NormStatus::Trivial;
  } else if (out.rhs_norm == 0.0 || !std::isfinite(out.lhs_norm) || !std::isfinite(out.rhs_norm)) {
    out.status = NormStatus::Violation;
    out.ratio = std::numeric_limits<double>::infinity();
  } else {
    out.ratio = std::pow(lhs / rhs, 1.0 / p);
    out.status = std::isfinite(out.ratio) ? NormStatus::Ok : NormStatus::Violation;
  }
  return out;
}

// ---------------------------------------------------------------------------

double Ball::distance(const Coords& c, int dim) const {
  double r2 = 0.0;
  for (int a = 0; a < dim; ++a) {
    const double t = static_cast<double>(c[a]) + 0.5 - center[a];
    r2 += t * t;
  }
  return std::sqrt(r2);
}

bool Ball::contains_center(const Coords& c, int dim, double factor) const {
  return distance(c, dim) <= factor * radius;
}

ExpIntegrabilityReport exp_integrability_check(const MeasureTree& tree, const PotentialParams& params,
                                               const Weight& w, const Ball& B,
                                               const ExpIntegrabilityOptions& opt) {
  if (!(B.radius > 0.0)) throw Error("exp_integrability_check: ball radius must be > 0");
  if (!(w.grid() == tree.grid())) throw Error("exp_integrability_check: weight lives on a different grid");
  const Grid& g = tree.grid();
  const int n = g.dim();
  const double q = params.q;
  ExpIntegrabilityReport rep;

  const LabFields raw = compute_fields(tree, params, opt.flavor, opt.threads);
  for (std::uint64_t i = 0; i < g.cell_count(); ++i)
    if (B.contains_center(g.coords_of(i), n)) rep.maximal_norm = std::max(rep.maximal_norm, raw.maximal[i]);
  if (!(rep.maximal_norm > 0.0)) return rep;
  rep.inconclusive = false;

  // Fields are degree-1 homogeneous, so normalizing them normalizes the measure.
  const double scale = 1.0 / rep.maximal_norm;
  std::vector<double> T(raw.potential.size());
  for (std::size_t i = 0; i < T.size(); ++i) T[i] = raw.potential[i] * scale;
  const double e = n - params.alpha;
  rep.mass_B = tree.total_mass() * scale;
  rep.threshold = std::pow(e * q, 1.0 / q) * rep.mass_B / std::pow(B.radius, e);

  std::vector<std::uint64_t> in2B;
  double sigma2B = 0.0;
  double tmax = 0.0;
  for (std::uint64_t i = 0; i < g.cell_count(); ++i) {
    if (B.contains_center(g.coords_of(i), n, 2.0)) {
      in2B.push_back(i);
      sigma2B += w.density(i);
      tmax = std::max(tmax, T[i]);
    } else {
      rep.max_T_outside_2B = std::max(rep.max_T_outside_2B, T[i]);
    }
  }
  rep.containment = rep.max_T_outside_2B <= rep.threshold;

  auto sigma_above = [&](double lambda) {
    double s = 0.0;
    for (auto i : in2B)
      if (T[i] > lambda) s += w.density(i);
    return s;
  };

  // Halving ratios on a linear lambda grid from the threshold to tmax / 2.
  const double lo = rep.threshold, hi = tmax / 2.0;
  const int pts = std::max(opt.lambda_points, 2);
  rep.fitted_c = std::numeric_limits<double>::infinity();
  if (hi > lo) {
    for (int k = 0; k < pts; ++k) {
      const double lambda = lo + (hi - lo) * k / (pts - 1);
      HalvingRow row;
      row.lambda = lambda;
      row.sigma_lambda = sigma_above(lambda);
      row.sigma_2lambda = sigma_above(2.0 * lambda);
      if (!(row.sigma_lambda > 0.0)) continue;
      row.ratio = row.sigma_2lambda / row.sigma_lambda;
      if (row.ratio > 0.0) rep.fitted_c = std::min(rep.fitted_c, -std::log(row.ratio) / std::pow(lambda, q));
      rep.halving.push_back(row);
    }
  }
  // stays infinite when every ratio is 0
  if (rep.halving.empty()) rep.fitted_c = 0.0;
  rep.halving_holds = !rep.halving.empty() && rep.fitted_c > 0.0;
  for (auto& row : rep.halving) {
    row.bound = std::isfinite(rep.fitted_c) ? std::exp(-rep.fitted_c * std::pow(row.lambda, q)) : 0.0;
    if (row.ratio > row.bound * (1.0 + 1e-12)) rep.halving_holds = false;
  }

  std::vector<double> grid = opt.c_test_grid;
  if (grid.empty())
    for (int k = 1; k <= 80; ++k) grid.push_back(0.05 * k);
  for (double c : grid) {
    double s = 0.0;
    for (auto i : in2B) s += w.density(i) * std::exp(c * std::pow(T[i], q));
    const double avg = sigma2B > 0.0 ? s / sigma2B : 0.0;
    rep.averages.emplace_back(c, avg);
    if (avg <= opt.C_target) rep.largest_c_test = std::max(rep.largest_c_test, c);
  }

  // -ln(sigma{T > lambda} / sigma(2B)) ~ a + b lambda^s, best R^2 over s in
  // [0.25, 4], lambda between the 0.75 and 0.999 quantiles of T on 2B.
  std::vector<std::pair<double, double>> tail;
  {
    std::vector<double> t2b;
    for (auto i : in2B) t2b.push_back(T[i]);
    const auto qs = positive_quantiles(t2b, {0.75, 0.999});
    if (qs.size() == 2 && qs[1] > qs[0]) {
      for (int k = 0; k < pts; ++k) {
        const double lambda = qs[0] + (qs[1] - qs[0]) * k / (pts - 1);
        const double s = sigma_above(lambda);
        if (s > 0.0) tail.emplace_back(lambda, -std::log(s / sigma2B));
      }
    }
  }
  if (tail.size() >= 3) {
    rep.power_fit_r2 = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 75; ++k) {
      const double s = 0.25 + 0.05 * k;
      double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
      for (auto [lambda, y] : tail) {
        const double x = std::pow(lambda, s);
        sx += x, sy += y, sxx += x * x, sxy += x * y, syy += y * y;
      }
      const double m = static_cast<double>(tail.size());
      const double vx = m * sxx - sx * sx, vy = m * syy - sy * sy, cxy = m * sxy - sx * sy;
      if (!(vx > 0.0) || !(vy > 0.0)) continue;
      const double r2 = cxy * cxy / (vx * vy);
      if (r2 > rep.power_fit_r2) {
        rep.power_fit_r2 = r2;
        rep.power_fit_s = s;
      }
    }
  }

  bool first = true;
  for (std::uint64_t i = 0; i < g.cell_count(); ++i) {
    const double rel = B.distance(g.coords_of(i), n) / B.radius;
    if (rel < opt.log_window_lo || rel > opt.log_window_hi) continue;
    const double r = T[i] / std::log(1.0 / rel);
    ++rep.window_cells;
    rep.window_ratio_min = first ? r : std::min(rep.window_ratio_min, r);
    rep.window_ratio_max = first ? r : std::max(rep.window_ratio_max, r);
    first = false;
  }
  rep.window_ok = rep.window_cells > 0 && rep.window_ratio_min >= opt.log_ratio_lo &&
                  rep.window_ratio_max <= opt.log_ratio_hi;
  return rep;
}

// ---------------------------------------------------------------------------

MeasureTree random_atoms_measure(const Grid& grid, std::uint64_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Atom> atoms(count);
  for (auto& a : atoms) {
    for (int i = 0; i < grid.dim(); ++i) a.cell[i] = rng.below(grid.side_at(0));
    a.mass = 1.0 - rng.uniform();
  }
  return MeasureTree::build(grid, atoms);
}

MeasureTree random_sparse_measure(const Grid& grid, std::uint64_t seed, int min_atoms, int max_atoms) {
  if (min_atoms < 0 || max_atoms < min_atoms) throw Error("random_sparse_measure: bad atom count range");
  Rng rng(seed);
  const auto count = static_cast<std::uint64_t>(rng.between(min_atoms, max_atoms));
  std::uint64_t s = seed;
  return random_atoms_measure(grid, count, splitmix64(s));
}

MeasureTree radial_power_measure(const Grid& grid, const Ball& B, double exponent) {
  grid.require_dense("radial_power_measure");
  std::vector<double> cells(grid.cell_count(), 0.0);
  const double vol = std::pow(B.radius, -grid.dim());
  for (std::uint64_t i = 0; i < cells.size(); ++i) {
    const Coords c = grid.coords_of(i);
    const double d = B.distance(c, grid.dim());
    if (d > B.radius) continue;
    if (d == 0.0) throw Error("radial_power_measure: a cell center sits on the singularity");
    cells[i] = std::pow(d / B.radius, exponent) * vol;
  }
  return MeasureTree::from_cell_masses(grid, std::move(cells));
}

}  // namespace dyadlab
