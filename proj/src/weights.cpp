#include "dyadlab/weights.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dyadlab/measure_tree.hpp"
#include "dyadlab/rng.hpp"
#include "parallel.hpp"

namespace dyadlab {

Weight::Weight(const Grid& grid, Kind kind, std::vector<double> density, std::string label)
    : grid_(grid), kind_(kind), density_(std::move(density)), label_(std::move(label)) {
  grid_.require_dense("weight");
  if (density_.size() != grid_.cell_count())
    throw Error("weight: expected " + std::to_string(grid_.cell_count()) + " densities, got " +
                std::to_string(density_.size()));
  for (double d : density_)
    if (!std::isfinite(d) || d < 0.0) throw Error("weight: densities must be finite and >= 0");
}

Weight Weight::constant(const Grid& grid, double value) {
  grid.require_dense("weight");
  char buf[48];
  std::snprintf(buf, sizeof buf, "constant %g", value);
  return Weight(grid, Kind::Constant, std::vector<double>(grid.cell_count(), value), buf);
}

Weight Weight::power(const Grid& grid, double gamma, const std::array<double, kMaxDim>& center) {
  grid.require_dense("weight");
  if (!std::isfinite(gamma)) throw Error("power weight: gamma must be finite");
  const int d = grid.dim();
  std::vector<double> dens(grid.cell_count());
  for (std::uint64_t i = 0; i < dens.size(); ++i) {
    const Coords c = grid.coords_of(i);
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double t = static_cast<double>(c[a]) + 0.5 - center[a];
      r2 += t * t;
    }
    if (r2 > 0.0) {
      dens[i] = std::pow(r2, 0.5 * gamma);
      continue;
    }
    // every corner sample sits at distance sqrt(n)/4
    dens[i] = std::pow(d / 16.0, 0.5 * gamma);
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "power gamma=%g", gamma);
  return Weight(grid, Kind::Power, std::move(dens), buf);
}

Weight Weight::custom(const Grid& grid, std::vector<double> density, std::string label) {
  return Weight(grid, Kind::Custom, std::move(density), std::move(label));
}

Weight Weight::indicator(const CellSet& set, std::string label) {
  std::vector<double> dens(set.size());
  for (std::uint64_t i = 0; i < dens.size(); ++i) dens[i] = set.contains(i) ? 1.0 : 0.0;
  return Weight(set.grid(), Kind::Custom, std::move(dens), std::move(label));
}

Weight Weight::half_space(const Grid& grid) {
  grid.require_dense("weight");
  CellSet half(grid);
  const std::uint64_t mid = grid.side_at(0) / 2;
  for (std::uint64_t i = 0; i < grid.cell_count(); ++i)
    if (grid.coords_of(i)[0] < mid) half.insert(i);
  return indicator(half, "half-space");
}

Weight Weight::with_claim(double theta, double C) const {
  if (!(theta > 0.0) || !(C > 0.0)) throw Error("weak A-infinity claim: theta and C must be > 0");
  Weight w = *this;
  w.claim_ = WeakAinftyClaim{theta, C};
  return w;
}

double Weight::sigma(const CellSet& e) const {
  if (!(e.grid() == grid_)) throw Error("sigma_measure: cell set lives on a different grid");
  double s = 0.0;
  const auto& bits = e.bits();
  for (std::uint64_t i = 0; i < bits.size(); ++i)
    if (bits[i]) s += density_[i];
  return s;
}

namespace {

// Visits every cell of the box [lo, hi] (inclusive, per axis) in linear order.
template <typename F>
void for_box(const Grid& g, const Coords& lo, const Coords& hi, F&& f) {
  const int d = g.dim();
  Coords c = lo;
  while (true) {
    f(c);
    int a = 0;
    for (; a < d; ++a) {
      if (c[a] < hi[a]) {
        ++c[a];
        break;
      }
      c[a] = lo[a];
    }
    if (a == d) return;
  }
}

}  // namespace

double Weight::sigma_cube(const DyadicCube& q) const {
  grid_.check_cube(q, "sigma_cube");
  Coords lo{}, hi{};
  for (int a = 0; a < grid_.dim(); ++a) {
    lo[a] = q.lower(a);
    hi[a] = lo[a] + q.side() - 1;
  }
  double s = 0.0;
  for_box(grid_, lo, hi, [&](const Coords& c) { s += density_[grid_.linear_index(c)]; });
  return s;
}

double Weight::sigma_doubled(const DyadicCube& q, bool* clipped) const {
  grid_.check_cube(q, "sigma_doubled");
  const int d = grid_.dim();
  const std::int64_t side = static_cast<std::int64_t>(grid_.side_at(0));
  const std::int64_t s = static_cast<std::int64_t>(q.side());
  Coords lo{}, hi{};
  bool clip = false;
  for (int a = 0; a < d; ++a) {
    const std::int64_t lower = static_cast<std::int64_t>(q.lower(a));
    // for unit cubes the half-cells on either side are taken as whole cells at weight 1/2
    const std::int64_t pad = q.level == 0 ? 1 : s / 2;
    std::int64_t first = lower - pad, last = lower + s - 1 + pad;
    if (first < 0) first = 0, clip = true;
    if (last > side - 1) last = side - 1, clip = true;
    lo[a] = static_cast<std::uint64_t>(first);
    hi[a] = static_cast<std::uint64_t>(last);
  }
  if (clipped) *clipped = clip;
  double sum = 0.0;
  for_box(grid_, lo, hi, [&](const Coords& c) {
    double w = 1.0;
    if (q.level == 0)
      for (int a = 0; a < d; ++a)
        if (c[a] != q.coords[a]) w *= 0.5;
    sum += w * density_[grid_.linear_index(c)];
  });
  return sum;
}

double sigma_measure(const Weight& w, const CellSet& e) { return w.sigma(e); }

Weight parse_weight_spec(std::string_view spec, const Grid& grid) {
  std::istringstream in{std::string(spec)};
  std::string kind;
  in >> kind;
  auto parse_double = [&](std::string_view tok, const char* what) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size())
      throw Error("weight spec: bad number '" + std::string(tok) + "' for " + what);
    return v;
  };
  if (kind == "constant") {
    double value = 1.0;
    std::string tok;
    while (in >> tok) {
      if (tok.rfind("value=", 0) != 0) throw Error("weight spec: unexpected '" + tok + "'");
      value = parse_double(std::string_view(tok).substr(6), "value");
    }
    return Weight::constant(grid, value);
  }
  if (kind == "power") {
    std::optional<double> gamma;
    std::array<double, kMaxDim> center{};
    bool have_center = false;
    std::string tok;
    while (in >> tok) {
      std::string_view t = tok;
      if (t.rfind("gamma=", 0) == 0) {
        gamma = parse_double(t.substr(6), "gamma");
      } else if (t.rfind("center=", 0) == 0) {
        t.remove_prefix(7);
        int a = 0;
        while (!t.empty()) {
          const auto comma = t.find(',');
          if (a >= grid.dim()) throw Error("weight spec: center has more than n coordinates");
          center[a++] = parse_double(t.substr(0, comma), "center");
          if (comma == std::string_view::npos) break;
          t.remove_prefix(comma + 1);
        }
        if (a != grid.dim()) throw Error("weight spec: center needs n coordinates");
        have_center = true;
      } else {
        throw Error("weight spec: unexpected '" + tok + "'");
      }
    }
    if (!gamma || !have_center) throw Error("weight spec: power needs gamma=<g> and center=<coords>");
    return Weight::power(grid, *gamma, center);
  }
  if (kind == "file") {
    std::string path;
    if (!(in >> path)) throw Error("weight spec: file needs a path");
    const MeasureTree t = read_measure_file(path);
    if (!(t.grid() == grid)) throw Error("weight file '" + path + "': grid does not match the measure");
    return Weight::custom(grid, t.cell_masses(), "file " + path);
  }
  if (kind == "half-space") return Weight::half_space(grid);
  if (kind == "cell") {
    std::string tok;
    if (!(in >> tok)) throw Error("weight spec: cell needs coordinates c0,c1,...");
    Coords c{};
    std::string_view t = tok;
    int a = 0;
    while (!t.empty()) {
      const auto comma = t.find(',');
      if (a >= grid.dim()) throw Error("weight spec: cell has more than n coordinates");
      const double v = parse_double(t.substr(0, comma), "cell");
      if (v < 0 || v != std::floor(v)) throw Error("weight spec: cell coordinates must be integers >= 0");
      c[a++] = static_cast<std::uint64_t>(v);
      if (comma == std::string_view::npos) break;
      t.remove_prefix(comma + 1);
    }
    if (a != grid.dim() || !grid.contains_cell(c)) throw Error("weight spec: cell outside the root cube");
    CellSet one(grid);
    one.insert(c);
    return Weight::indicator(one, "cell " + tok);
  }
  throw Error("weight spec: unknown kind '" + kind + "' (constant | power | file | half-space | cell)");
}

// ---------------------------------------------------------------------------

namespace {

struct Sample {
  DyadicCube cube;
  std::vector<std::uint64_t> cells;
  double e_sigma = 0.0;
  double double_sigma = 0.0;
  double v = 0.0;
  double ratio = 0.0;
  bool clipped = false;
};

Sample draw(const Weight& w, Rng rng, bool greedy) {
  const Grid& g = w.grid();
  const int d = g.dim();
  Sample s;
  s.cube.level = static_cast<int>(rng.below(g.root_level() + 1));
  for (int a = 0; a < d; ++a) s.cube.coords[a] = rng.below(g.side_at(s.cube.level));

  std::vector<std::uint64_t> inside;
  Coords lo{}, hi{};
  for (int a = 0; a < d; ++a) {
    lo[a] = s.cube.lower(a);
    hi[a] = lo[a] + s.cube.side() - 1;
  }
  for_box(g, lo, hi, [&](const Coords& c) { inside.push_back(g.linear_index(c)); });

  if (greedy) {
    const int u = static_cast<int>(rng.below(d * s.cube.level + 1));
    const std::size_t m = std::size_t{1} << u;
    std::stable_sort(inside.begin(), inside.end(), [&](std::uint64_t a, std::uint64_t b) {
      return w.density(a) > w.density(b);
    });
    inside.resize(m);
    std::sort(inside.begin(), inside.end());
    s.cells = std::move(inside);
  } else {
    const int sub = static_cast<int>(rng.below(s.cube.level + 1));
    const std::uint64_t per_axis = std::uint64_t{1} << (s.cube.level - sub);
    const std::uint64_t count = std::uint64_t{1} << (d * (s.cube.level - sub));
    std::vector<std::uint8_t> take(count);
    bool any = false;
    for (auto& t : take) any |= (t = static_cast<std::uint8_t>(rng.next() >> 63));
    if (!any) take[rng.below(count)] = 1;
    for (std::uint64_t k = 0; k < count; ++k) {
      if (!take[k]) continue;
      Coords slo{}, shi{};
      std::uint64_t rest = k;
      for (int a = 0; a < d; ++a) {
        slo[a] = lo[a] + (rest % per_axis) * (std::uint64_t{1} << sub);
        shi[a] = slo[a] + (std::uint64_t{1} << sub) - 1;
        rest /= per_axis;
      }
      for_box(g, slo, shi, [&](const Coords& c) { s.cells.push_back(g.linear_index(c)); });
    }
    std::sort(s.cells.begin(), s.cells.end());
  }
  for (auto idx : s.cells) s.e_sigma += w.density(idx);
  s.double_sigma = w.sigma_doubled(s.cube, &s.clipped);
  s.v = static_cast<double>(s.cells.size()) / static_cast<double>(g.cube_count(0) >> (d * (g.root_level() - s.cube.level)));
  if (s.double_sigma > 0.0) s.ratio = s.e_sigma / s.double_sigma;
  else s.ratio = s.e_sigma > 0.0 ? INFINITY : 0.0;
  return s;
}

}  // namespace

AinftyReport check_weak_ainfty(const Weight& w, std::uint64_t samples, std::uint64_t seed,
                               int threads, std::size_t max_witnesses) {
  if (samples == 0) throw Error("check_weak_ainfty: samples must be >= 1");
  std::vector<Sample> all(samples);
  detail::parallel_for(samples, threads, [&](std::uint64_t i) {
    all[i] = draw(w, Rng::stream(seed, i), i % 2 == 0);
  });

  AinftyReport rep;
  rep.samples = samples;
  rep.claim = w.claim();
  rep.C_reference = w.claim() ? w.claim()->C : std::exp2(w.grid().dim());
  for (const auto& s : all) {
    rep.max_ratio = std::max(rep.max_ratio, s.ratio);
    if (s.clipped) ++rep.clipped_samples;
    if (!rep.claim) continue;
    const double bound = rep.claim->C * std::pow(s.v, rep.claim->theta);
    if (!(s.ratio <= bound * (1.0 + 1e-12))) {
      ++rep.violations;
      if (rep.witnesses.size() < max_witnesses)
        rep.witnesses.push_back(
            {s.cube, s.cells, s.e_sigma, s.double_sigma, s.v, s.ratio, bound});
    }
  }
  // Tightest exponent on the grid k/20 whose constant still fits the reference.
  rep.theta_hat = 0.0;
  rep.C_hat = rep.max_ratio;
  for (int k = 1; k <= 40; ++k) {
    const double theta = k / 20.0;
    double c = 0.0;
    for (const auto& s : all)
      if (s.ratio > 0.0) c = std::max(c, s.ratio / std::pow(s.v, theta));
    if (c <= rep.C_reference) {
      rep.theta_hat = theta;
      rep.C_hat = c;
    }
  }
  return rep;
}

}  // namespace dyadlab
