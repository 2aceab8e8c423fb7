#include "dyadlab/whitney.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace dyadlab {

std::string_view to_string(DecompositionFlavor f) {
  return f == DecompositionFlavor::Whitney ? "whitney" : "dyadic_maximal";
}

namespace {

using i64 = std::int64_t;

// Cell counts of G per dyadic cube, every level.
class CountPyramid {
 public:
  explicit CountPyramid(const CellSet& G) : grid_(G.grid()) {
    const int J = grid_.root_level();
    levels_.resize(J + 1);
    levels_[0].assign(G.bits().begin(), G.bits().end());
    for (int k = 1; k <= J; ++k) {
      levels_[k].assign(grid_.cube_count(k), 0);
      for (std::uint64_t i = 0; i < levels_[k - 1].size(); ++i) {
        Coords c = grid_.coords_of(i, k - 1);
        for (auto& v : c) v >>= 1;
        levels_[k][grid_.linear_index(c, k)] += levels_[k - 1][i];
      }
    }
  }
  std::uint64_t count(const DyadicCube& q) const { return levels_[q.level][grid_.linear_index(q)]; }
  bool full(const DyadicCube& q) const {
    return count(q) == (std::uint64_t{1} << (grid_.dim() * q.level));
  }

 private:
  Grid grid_;
  std::vector<std::vector<std::uint64_t>> levels_;
};

// Summed-area table of the complement cells inside the root.
class ComplementIndex {
 public:
  explicit ComplementIndex(const CellSet& G) : grid_(G.grid()), set_(&G) {
    const int d = grid_.dim();
    side_ = static_cast<i64>(grid_.side_at(0));
    stride_ = {1, 1, 1};
    for (int a = 1; a < d; ++a) stride_[a] = stride_[a - 1] * (side_ + 1);
    sat_.assign(static_cast<std::size_t>(stride_[d - 1] * (side_ + 1)), 0);
    for (std::uint64_t i = 0; i < G.size(); ++i) {
      if (G.contains(i)) continue;
      const Coords c = grid_.coords_of(i);
      i64 at = 0;
      for (int a = 0; a < d; ++a) at += (static_cast<i64>(c[a]) + 1) * stride_[a];
      sat_[at] = 1;
      ++total_;
    }
    for (int a = 0; a < d; ++a)
      for (std::size_t i = 0; i < sat_.size(); ++i)
        if ((static_cast<i64>(i) / stride_[a]) % (side_ + 1) > 0) sat_[i] += sat_[i - stride_[a]];
  }

  i64 total() const { return total_; }

  // Complement cells in [lo, hi] per axis (clipped to the root).
  i64 count(std::array<i64, kMaxDim> lo, std::array<i64, kMaxDim> hi) const {
    const int d = grid_.dim();
    for (int a = 0; a < d; ++a) {
      lo[a] = std::max<i64>(lo[a], 0);
      hi[a] = std::min<i64>(hi[a], side_ - 1);
      if (lo[a] > hi[a]) return 0;
    }
    i64 sum = 0;
    for (int corner = 0; corner < (1 << d); ++corner) {
      i64 at = 0;
      int sign = 1;
      for (int a = 0; a < d; ++a) {
        if (corner >> a & 1) {
          at += lo[a] * stride_[a];
          sign = -sign;
        } else {
          at += (hi[a] + 1) * stride_[a];
        }
      }
      sum += sign * sat_[at];
    }
    return sum;
  }

  // Exact squared gap from q to the nearest complement cell inside the root,
  // or max() if there is none.
  std::uint64_t inner_distance2(const DyadicCube& q) const {
    if (total_ == 0) return std::numeric_limits<std::uint64_t>::max();
    const int d = grid_.dim();
    std::array<i64, kMaxDim> lo{}, hi{};
    for (int a = 0; a < d; ++a) {
      lo[a] = static_cast<i64>(q.lower(a));
      hi[a] = lo[a] + static_cast<i64>(q.side()) - 1;
    }
    auto grown = [&](i64 g) {
      std::array<i64, kMaxDim> l = lo, h = hi;
      for (int a = 0; a < d; ++a) l[a] -= g, h[a] += g;
      return count(l, h);
    };
    // Smallest Chebyshev reach g whose window holds a complement cell.
    i64 a0 = 0, b0 = side_;
    while (a0 < b0) {
      const i64 m = (a0 + b0) / 2;
      if (grown(m) > 0) b0 = m;
      else a0 = m + 1;
    }
    const i64 g = a0;
    // Box gap to a cell at Chebyshev offset g is g - 1 per axis at least.
    // Every cell with a smaller Euclidean gap sits within reach sqrt(n) g.
    const i64 reach = static_cast<i64>(std::ceil(std::sqrt(static_cast<double>(d)) * g)) + 1;
    std::array<i64, kMaxDim> l = lo, h = hi;
    for (int a = 0; a < d; ++a) {
      l[a] = std::max<i64>(0, lo[a] - reach);
      h[a] = std::min<i64>(side_ - 1, hi[a] + reach);
    }
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    Coords c{};
    for (int a = 0; a < d; ++a) c[a] = static_cast<std::uint64_t>(l[a]);
    while (true) {
      if (!set_->contains(c)) {
        std::uint64_t s = 0;
        for (int a = 0; a < d; ++a) {
          const i64 x = static_cast<i64>(c[a]);
          const i64 gap = std::max<i64>({0, x - hi[a] - 1, lo[a] - x - 1});
          s += static_cast<std::uint64_t>(gap * gap);
        }
        best = std::min(best, s);
      }
      int a = 0;
      for (; a < d; ++a) {
        if (static_cast<i64>(c[a]) < h[a]) {
          ++c[a];
          break;
        }
        c[a] = static_cast<std::uint64_t>(l[a]);
      }
      if (a == d) break;
    }
    return best;
  }

 private:
  Grid grid_;
  const CellSet* set_;
  i64 side_ = 0;
  std::array<i64, kMaxDim> stride_{};
  std::vector<i64> sat_;
  i64 total_ = 0;
};

std::uint64_t outer_distance2(const Grid& g, const DyadicCube& q) {
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  for (int a = 0; a < g.dim(); ++a) {
    const std::uint64_t lower = q.lower(a);
    const std::uint64_t upper_gap = g.side_at(0) - lower - q.side();
    best = std::min({best, lower * lower, upper_gap * upper_gap});
  }
  return best;
}

std::uint64_t distance2(const ComplementIndex& idx, const Grid& g, const DyadicCube& q) {
  return std::min(idx.inner_distance2(q), outer_distance2(g, q));
}

void canonical_sort(std::vector<DyadicCube>& cubes) { std::sort(cubes.begin(), cubes.end()); }

}  // namespace

std::uint64_t squared_distance_to_complement(const CellSet& G, const DyadicCube& q) {
  G.grid().check_cube(q, "squared_distance_to_complement");
  const ComplementIndex idx(G);
  return distance2(idx, G.grid(), q);
}

LevelSetDecomposition dyadic_maximal_decomposition(const CellSet& G) {
  const Grid& g = G.grid();
  LevelSetDecomposition out{DecompositionFlavor::DyadicMaximal, G, {}};
  const CountPyramid counts(G);
  std::vector<DyadicCube> stack{g.root()};
  while (!stack.empty()) {
    const DyadicCube q = stack.back();
    stack.pop_back();
    const std::uint64_t c = counts.count(q);
    if (c == 0) continue;
    if (counts.full(q)) {
      out.cubes.push_back(q);
      continue;
    }
    for (const auto& ch : g.children(q)) stack.push_back(ch);
  }
  canonical_sort(out.cubes);
  return out;
}

LevelSetDecomposition whitney_decomposition(const CellSet& G) {
  const Grid& g = G.grid();
  LevelSetDecomposition out{DecompositionFlavor::Whitney, G, {}};
  const CountPyramid counts(G);
  const ComplementIndex comp(G);
  std::vector<DyadicCube> stack{g.root()};
  while (!stack.empty()) {
    const DyadicCube q = stack.back();
    stack.pop_back();
    if (counts.count(q) == 0) continue;
    if (counts.full(q)) {
      const std::uint64_t diam2 = static_cast<std::uint64_t>(g.dim()) << (2 * q.level);
      if (q.level == 0 || diam2 <= distance2(comp, g, q)) {
        out.cubes.push_back(q);
        continue;
      }
    }
    for (const auto& ch : g.children(q)) stack.push_back(ch);
  }
  canonical_sort(out.cubes);
  return out;
}

DecompositionReport verify_decomposition(const LevelSetDecomposition& d) {
  const CellSet& G = d.source;
  const Grid& g = G.grid();
  const int n = g.dim();
  DecompositionReport rep;
  rep.source_cells = G.count();
  rep.overlap_bound = std::uint64_t{1} << (2 * n);

  std::vector<std::uint32_t> hits(g.cell_count(), 0);
  for (const auto& q : d.cubes) {
    g.check_cube(q, "verify_decomposition");
    rep.covered_cells += std::uint64_t{1} << (n * q.level);
    Coords lo{}, c{};
    for (int a = 0; a < n; ++a) lo[a] = c[a] = q.lower(a);
    while (true) {
      const std::uint64_t i = g.linear_index(c);
      if (++hits[i] > 1) rep.disjoint = false;
      if (!G.contains(i)) rep.contained = false;
      int a = 0;
      for (; a < n; ++a) {
        if (c[a] + 1 < lo[a] + q.side()) {
          ++c[a];
          break;
        }
        c[a] = lo[a];
      }
      if (a == n) break;
    }
  }
  bool same = true;
  for (std::uint64_t i = 0; i < hits.size(); ++i)
    if ((hits[i] > 0) != G.contains(i)) same = false;
  rep.tiles_exactly = rep.disjoint && rep.contained && same && rep.covered_cells == rep.source_cells;

  // Overlap of concentric doubles on the half-cell lattice via an n-d difference array.
  const i64 hs = 2 * static_cast<i64>(g.side_at(0));
  std::array<i64, kMaxDim> stride{1, 1, 1};
  for (int a = 1; a < n; ++a) stride[a] = stride[a - 1] * (hs + 1);
  std::vector<i64> diff(static_cast<std::size_t>(stride[n - 1] * (hs + 1)), 0);
  for (const auto& q : d.cubes) {
    std::array<i64, kMaxDim> lo{}, hi{};  // half-open in half-cell units
    for (int a = 0; a < n; ++a) {
      const i64 L = 2 * static_cast<i64>(q.lower(a));
      const i64 s = static_cast<i64>(q.side());
      lo[a] = std::max<i64>(0, L - s);
      hi[a] = std::min<i64>(hs, L + 3 * s);
    }
    for (int corner = 0; corner < (1 << n); ++corner) {
      i64 at = 0;
      int sign = 1;
      for (int a = 0; a < n; ++a) {
        if (corner >> a & 1) {
          at += hi[a] * stride[a];
          sign = -sign;
        } else {
          at += lo[a] * stride[a];
        }
      }
      diff[at] += sign;
    }
  }
  for (int a = 0; a < n; ++a)
    for (std::size_t i = 0; i < diff.size(); ++i)
      if ((static_cast<i64>(i) / stride[a]) % (hs + 1) > 0) diff[i] += diff[i - stride[a]];
  for (std::size_t i = 0; i < diff.size(); ++i) {
    bool inside = true;
    for (int a = 0; a < n; ++a)
      if ((static_cast<i64>(i) / stride[a]) % (hs + 1) == hs) inside = false;
    if (inside) rep.max_overlap_of_doubles = std::max<std::uint64_t>(rep.max_overlap_of_doubles, diff[i]);
  }

  const DyadicCube root = g.root();
  const CountPyramid counts(G);
  const ComplementIndex comp(G);
  bool first_ratio = true, first_unit = true;
  for (const auto& q : d.cubes) {
    if (!(q == root) && counts.full(q.parent())) rep.parent_maximality = false;
    const double dist = std::sqrt(static_cast<double>(distance2(comp, g, q)));
    const double diam = std::sqrt(static_cast<double>(n)) * static_cast<double>(q.side());
    const double r = dist / diam;
    if (q.level >= 1) {
      ++rep.ratio_cubes;
      rep.dist_ratio_min = first_ratio ? r : std::min(rep.dist_ratio_min, r);
      rep.dist_ratio_max = first_ratio ? r : std::max(rep.dist_ratio_max, r);
      first_ratio = false;
    } else {
      ++rep.unit_cells;
      rep.unit_dist_ratio_min = first_unit ? r : std::min(rep.unit_dist_ratio_min, r);
      rep.unit_dist_ratio_max = first_unit ? r : std::max(rep.unit_dist_ratio_max, r);
      first_unit = false;
    }
  }
  return rep;
}

void write_decomposition_csv(std::ostream& out, const LevelSetDecomposition& d) {
  const int n = d.source.grid().dim();
  out << "level";
  for (int a = 0; a < n; ++a) out << ",c" << a;
  out << '\n';
  for (const auto& q : d.cubes) {
    out << q.level;
    for (int a = 0; a < n; ++a) out << ',' << q.coords[a];
    out << '\n';
  }
}

}  // namespace dyadlab
