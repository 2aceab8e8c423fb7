#include "dyadlab/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>

#include "parallel.hpp"

namespace dyadlab {

using u128 = unsigned __int128;

namespace {

std::uint64_t isqrt(u128 v) {
  auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<long double>(v)));
  while (static_cast<u128>(r) * r > v) --r;
  while (static_cast<u128>(r + 1) * (r + 1) <= v) ++r;
  return r;
}

u128 square(std::uint64_t v) { return static_cast<u128>(v) * v; }

}  // namespace

PotentialParams PotentialParams::for_grid(const Grid& grid, double alpha, double q, bool tail) {
  PotentialParams p;
  p.dim = grid.dim();
  p.alpha = alpha;
  p.q = q;
  p.level_min = 0;
  p.level_max = grid.root_level();
  p.include_supercube_tail = tail;
  p.validate_for(grid);
  return p;
}

void PotentialParams::validate() const {
  if (dim < 1 || dim > kMaxDim) throw Error("potential params: dimension must be 1, 2 or 3");
  if (!(alpha > 0.0 && alpha < dim))
    throw Error("potential params: alpha must satisfy 0 < alpha < n");
  if (!(q > 0.0) || !std::isfinite(q)) throw Error("potential params: q must be finite and > 0");
  if (level_min < 0) throw Error("potential params: level_min must be >= 0");
  if (level_min > level_max) throw Error("potential params: level_min exceeds level_max");
  if (level_max > 62) throw Error("potential params: level_max must be <= 62");
}

void PotentialParams::validate_for(const Grid& grid) const {
  validate();
  if (dim != grid.dim()) throw Error("potential params: dimension does not match the grid");
  if (include_supercube_tail && level_max < grid.root_level())
    throw Error("potential params: the supercube tail requires level_max >= root level");
}

std::string_view to_string(Operator op) {
  switch (op) {
    case Operator::DyadicPotential: return "dyadic-potential";
    case Operator::BallPotential: return "ball-potential";
    case Operator::DyadicMaximal: return "dyadic-maximal";
    case Operator::BallMaximal: return "ball-maximal";
    case Operator::Shell: return "shell";
  }
  return "?";
}

Operator parse_operator(std::string_view name) {
  for (auto op : {Operator::DyadicPotential, Operator::BallPotential, Operator::DyadicMaximal,
                  Operator::BallMaximal, Operator::Shell})
    if (to_string(op) == name) return op;
  throw Error("unknown operator '" + std::string(name) + "'");
}

double geometric_tail_power(double mass, double exponent, double q, int first_level) {
  if (mass == 0.0) return 0.0;
  const double first = mass * std::exp2(-exponent * first_level);
  return std::pow(first, q) / (1.0 - std::exp2(-q * exponent));
}

// ---------------------------------------------------------------------------

struct PotentialEvaluator::BallIndex {
  std::once_flag atoms_once;
  std::vector<Atom> atoms;
  std::once_flag rows_once;
  std::vector<std::vector<double>> rows;  // per level: row-major, (side >> level) per row
};

PotentialEvaluator::PotentialEvaluator(const MeasureTree& tree, PotentialParams params)
    : tree_(&tree), params_(params), index_(std::make_shared<BallIndex>()) {
  params_.validate_for(tree.grid());
  exponent_ = params_.dim - params_.alpha;
  nonzero_cells_ = tree.nonzero_cells();
  const int top = std::max(params_.level_max, covering_level()) + 2;
  scales_.resize(top + 1);
  for (int k = 0; k <= top; ++k) scales_[k] = std::exp2(k * exponent_);
}

double PotentialEvaluator::scale(int level) const {
  return level < static_cast<int>(scales_.size()) ? scales_[level]
                                                  : std::exp2(level * exponent_);
}

void PotentialEvaluator::check_point(const Coords& x, const char* what) const {
  if (!grid().contains_cell(x))
    throw Error(std::string(what) + ": point " + to_string(DyadicCube{0, x}, grid().dim()) +
                " is outside the root cube");
}

int PotentialEvaluator::covering_level() const {
  // Smallest j with 4^j >= n (side - 1)^2: B(x, 2^j) then holds every cell.
  const u128 need = square(grid().side_at(0) - 1) * static_cast<unsigned>(grid().dim());
  int j = 0;
  while ((static_cast<u128>(1) << (2 * j)) < need) ++j;
  return j;
}

PointValues PotentialEvaluator::combine(const std::vector<double>& terms, bool tail,
                                        double tail_mass, int tail_first) const {
  PointValues out;
  for (double t : terms) out.maximal = std::max(out.maximal, t);
  double top = out.maximal;
  if (tail) top = std::max(top, tail_mass / scale(tail_first));
  if (top == 0.0) return out;
  const double q = params_.q;
  // Normalizing by the largest term makes potential >= maximal hold exactly.
  double s = 0.0;
  if (q == 1.0) {
    for (double t : terms) s += t / top;
  } else {
    for (double t : terms) s += std::pow(t / top, q);
  }
  if (tail && tail_mass > 0.0) {
    const double first = tail_mass / (top * scale(tail_first));
    s += std::pow(first, q) / (1.0 - std::exp2(-q * exponent_));
  }
  out.potential = q == 1.0 ? top * s : top * std::pow(s, 1.0 / q);
  return out;
}

PointValues PotentialEvaluator::dyadic_pair(const Coords& x) const {
  check_point(x, "dyadic_potential");
  const Grid& g = grid();
  const int hi = std::min(params_.level_max, g.root_level());
  std::vector<double> terms;
  terms.reserve(hi - params_.level_min + 1);
  for (int k = params_.level_min; k <= hi; ++k) {
    Coords c = x;
    for (auto& v : c) v >>= k;
    terms.push_back(tree_->mass_at(k, g.linear_index(c, k)) / scale(k));
  }
  return combine(terms, params_.include_supercube_tail, tree_->total_mass(), g.root_level() + 1);
}

double PotentialEvaluator::shell(int k, const Coords& x) const {
  check_point(x, "shell_function_g");
  if (k < params_.level_min || k > params_.level_max || k > grid().root_level())
    throw Error("shell_function_g: level " + std::to_string(k) + " outside the level range");
  Coords c = x;
  for (auto& v : c) v >>= k;
  return tree_->mass_at(k, grid().linear_index(c, k)) / scale(k);
}

double PotentialEvaluator::ball_mass(const Coords& x, int j) const {
  check_point(x, "ball_mass");
  if (j < 0 || j > 62) throw Error("ball_mass: radius exponent out of range");
  return ball_mass_unchecked(x, j);
}

double PotentialEvaluator::ball_mass_unchecked(const Coords& x, int j) const {
  const Grid& g = grid();
  const std::uint64_t last = g.side_at(0) - 1;
  const u128 r2 = static_cast<u128>(1) << (2 * j);
  u128 far = 0;
  for (int i = 0; i < g.dim(); ++i) far += square(std::max(x[i], last - x[i]));
  if (r2 >= far) return tree_->total_mass();
  if (g.dim() == 1) {
    const std::uint64_t r = std::uint64_t{1} << j;
    const std::uint64_t lo = x[0] > r ? x[0] - r : 0;
    const std::uint64_t hi = std::min(last, x[0] + r);
    return interval_mass_1d(lo, hi);
  }
  if (!tree_->is_dense()) return ball_mass_atoms(x, r2);
  // Row scans cost about one pyramid query per row crossing the ball.
  const std::uint64_t span = std::min<std::uint64_t>(last + 1, 2 * (std::uint64_t{1} << std::min(j, 40)) + 1);
  std::uint64_t rows = span;
  if (g.dim() == 3) rows = span > (1ull << 31) ? ~0ull : span * span;
  const std::uint64_t row_cost = rows * 2 * static_cast<std::uint64_t>(g.root_level() + 1);
  if (nonzero_cells_ <= row_cost) return ball_mass_atoms(x, r2);
  return ball_mass_rows(x, r2);
}

double PotentialEvaluator::interval_mass_1d(std::uint64_t lo, std::uint64_t hi) const {
  // Canonical dyadic cover of [lo, hi] read from the tree levels.
  double sum = 0.0;
  std::uint64_t a = lo, b = hi + 1;
  for (int level = 0; a < b; ++level) {
    if (a & 1) sum += tree_->mass_at(level, a++);
    if (b & 1) sum += tree_->mass_at(level, --b);
    a >>= 1;
    b >>= 1;
  }
  return sum;
}

double PotentialEvaluator::row_interval(std::uint64_t row, std::uint64_t lo, std::uint64_t hi) const {
  const auto& rows = index_->rows;
  const int J = grid().root_level();
  double sum = 0.0;
  std::uint64_t a = lo, b = hi + 1;
  for (int level = 0; a < b; ++level) {
    const std::uint64_t base = row << (J - level);
    if (a & 1) sum += rows[level][base + a++];
    if (b & 1) sum += rows[level][base + --b];
    a >>= 1;
    b >>= 1;
  }
  return sum;
}

double PotentialEvaluator::ball_mass_rows(const Coords& x, u128 r2) const {
  std::call_once(index_->rows_once, [this] {
    const Grid& g = grid();
    const int J = g.root_level();
    const std::uint64_t nrows = g.cell_count() >> J;
    auto& rows = index_->rows;
    rows.resize(J + 1);
    rows[0] = tree_->cell_masses();
    for (int level = 1; level <= J; ++level) {
      const std::uint64_t width = std::uint64_t{1} << (J - level);
      rows[level].resize(nrows * width);
      for (std::uint64_t r = 0; r < nrows; ++r)
        for (std::uint64_t i = 0; i < width; ++i)
          rows[level][r * width + i] =
              rows[level - 1][2 * (r * width + i)] + rows[level - 1][2 * (r * width + i) + 1];
    }
  });
  const Grid& g = grid();
  const std::uint64_t last = g.side_at(0) - 1;
  const std::uint64_t side = last + 1;
  const std::uint64_t reach = isqrt(r2);
  auto axis_range = [&](std::uint64_t c, std::uint64_t w) {
    return std::pair{c > w ? c - w : 0, std::min(last, c + w)};
  };
  double sum = 0.0;
  auto scan_plane = [&](std::uint64_t z, u128 budget) {
    const std::uint64_t wy = isqrt(budget);
    const auto [y0, y1] = axis_range(x[1], wy);
    for (std::uint64_t y = y0; y <= y1; ++y) {
      const std::uint64_t dy = y > x[1] ? y - x[1] : x[1] - y;
      const std::uint64_t wx = isqrt(budget - square(dy));
      const auto [x0, x1] = axis_range(x[0], wx);
      sum += row_interval(z * side + y, x0, x1);
    }
  };
  if (g.dim() == 2) {
    scan_plane(0, r2);
  } else {
    const auto [z0, z1] = axis_range(x[2], reach);
    for (std::uint64_t z = z0; z <= z1; ++z) {
      const std::uint64_t dz = z > x[2] ? z - x[2] : x[2] - z;
      scan_plane(z, r2 - square(dz));
    }
  }
  return sum;
}

double PotentialEvaluator::ball_mass_atoms(const Coords& x, u128 r2) const {
  std::call_once(index_->atoms_once, [this] { index_->atoms = tree_->atoms(); });
  double sum = 0.0;
  const int d = grid().dim();
  for (const auto& a : index_->atoms) {
    u128 dist = 0;
    for (int i = 0; i < d; ++i) {
      const std::uint64_t diff = a.cell[i] > x[i] ? a.cell[i] - x[i] : x[i] - a.cell[i];
      dist += square(diff);
    }
    if (dist <= r2) sum += a.mass;
  }
  return sum;
}

PointValues PotentialEvaluator::ball_pair(const Coords& x) const {
  check_point(x, "ball_potential_F");
  const bool tail = params_.include_supercube_tail;
  const int hi = tail ? std::max(params_.level_max, covering_level() - 1) : params_.level_max;
  const double total = tree_->total_mass();
  std::vector<double> terms;
  terms.reserve(hi - params_.level_min + 1);
  bool covered = false;
  for (int j = params_.level_min; j <= hi; ++j) {
    const double m = covered ? total : ball_mass_unchecked(x, j);
    // Once a ball holds everything, every larger one does too.
    if (m == total) covered = true;
    terms.push_back(m / scale(j));
  }
  return combine(terms, tail, total, hi + 1);
}

double PotentialEvaluator::supercube_tail_power() const {
  if (!params_.include_supercube_tail) return 0.0;
  return geometric_tail_power(tree_->total_mass(), exponent_, params_.q, grid().root_level() + 1);
}

double PotentialEvaluator::evaluate(Operator op, const Coords& x, int shell_level) const {
  switch (op) {
    case Operator::DyadicPotential: return dyadic_potential(x);
    case Operator::BallPotential: return ball_potential(x);
    case Operator::DyadicMaximal: return dyadic_maximal(x);
    case Operator::BallMaximal: return ball_maximal(x);
    case Operator::Shell: return shell(shell_level, x);
  }
  throw Error("evaluate: unknown operator");
}

// ---------------------------------------------------------------------------

Field potential_field(const PotentialEvaluator& eval, Operator op, int threads, int shell_level) {
  const Grid& g = eval.grid();
  g.require_dense("potential_field");
  Field f{g, std::vector<double>(g.cell_count(), 0.0)};
  detail::parallel_for(g.cell_count(), threads, [&](std::uint64_t i) {
    f.values[i] = eval.evaluate(op, g.coords_of(i), shell_level);
  });
  return f;
}

Field potential_field(const MeasureTree& tree, const PotentialParams& params, Operator op,
                      int threads, int shell_level) {
  const PotentialEvaluator eval(tree, params);
  return potential_field(eval, op, threads, shell_level);
}

std::pair<Field, Field> potential_and_maximal_fields(const PotentialEvaluator& eval,
                                                     bool ball_flavor, int threads) {
  const Grid& g = eval.grid();
  g.require_dense("potential_field");
  Field pot{g, std::vector<double>(g.cell_count(), 0.0)};
  Field max{g, std::vector<double>(g.cell_count(), 0.0)};
  detail::parallel_for(g.cell_count(), threads, [&](std::uint64_t i) {
    const Coords c = g.coords_of(i);
    const PointValues v = ball_flavor ? eval.ball_pair(c) : eval.dyadic_pair(c);
    pot.values[i] = v.potential;
    max.values[i] = v.maximal;
  });
  return {std::move(pot), std::move(max)};
}

double dyadic_potential(const MeasureTree& tree, const PotentialParams& p, const Coords& x) {
  return PotentialEvaluator(tree, p).dyadic_potential(x);
}
double shell_function_g(const MeasureTree& tree, const PotentialParams& p, int k, const Coords& x) {
  return PotentialEvaluator(tree, p).shell(k, x);
}
double ball_potential_F(const MeasureTree& tree, const PotentialParams& p, const Coords& x) {
  return PotentialEvaluator(tree, p).ball_potential(x);
}
double fractional_maximal_dyadic(const MeasureTree& tree, const PotentialParams& p, const Coords& x) {
  return PotentialEvaluator(tree, p).dyadic_maximal(x);
}
double fractional_maximal_ball(const MeasureTree& tree, const PotentialParams& p, const Coords& x) {
  return PotentialEvaluator(tree, p).ball_maximal(x);
}

void write_field_csv(std::ostream& out, const Field& field, const std::string& value_name) {
  const int d = field.grid.dim();
  for (int i = 0; i < d; ++i) out << 'c' << i << ',';
  out << value_name << '\n';
  char buf[64];
  for (std::uint64_t idx = 0; idx < field.values.size(); ++idx) {
    const Coords c = field.grid.coords_of(idx);
    for (int i = 0; i < d; ++i) out << c[i] << ',';
    std::snprintf(buf, sizeof buf, "%.17g", field.values[idx]);
    out << buf << '\n';
  }
}

}  // namespace dyadlab
