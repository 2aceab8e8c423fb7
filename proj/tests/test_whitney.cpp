#include <doctest.h>

#include <sstream>

#include "dyadlab/rng.hpp"
#include "dyadlab/whitney.hpp"

using namespace dyadlab;

namespace {

CellSet cells_1d(const Grid& g, std::initializer_list<std::uint64_t> idx) {
  CellSet s(g);
  for (auto i : idx) s.insert(Coords{i, 0, 0});
  return s;
}

std::vector<DyadicCube> cubes_1d(std::initializer_list<std::pair<int, std::uint64_t>> c) {
  std::vector<DyadicCube> v;
  for (auto [l, x] : c) v.push_back(DyadicCube{l, {x, 0, 0}});
  return v;
}

// Brute force: distance from each cube boundary lattice point to every
// complement cell, with the outside of the root as an extra complement.
std::uint64_t brute_dist2(const CellSet& G, const DyadicCube& q) {
  const Grid& g = G.grid();
  const int n = g.dim();
  const std::int64_t side = static_cast<std::int64_t>(g.side_at(0));
  std::uint64_t best = ~std::uint64_t{0};
  auto consider = [&](const std::array<std::int64_t, kMaxDim>& lo) {  // unit cell [lo, lo+1)
    std::uint64_t d2 = 0;
    for (int a = 0; a < n; ++a) {
      const std::int64_t qlo = static_cast<std::int64_t>(q.lower(a));
      const std::int64_t qhi = qlo + static_cast<std::int64_t>(q.side());
      std::int64_t gap = 0;
      if (lo[a] + 1 <= qlo) gap = qlo - (lo[a] + 1);
      else if (lo[a] >= qhi) gap = lo[a] - qhi;
      d2 += static_cast<std::uint64_t>(gap * gap);
    }
    best = std::min(best, d2);
  };
  std::array<std::int64_t, kMaxDim> lo{};
  const std::int64_t span = side + 2;
  std::uint64_t total = 1;
  for (int a = 0; a < n; ++a) total *= static_cast<std::uint64_t>(span);
  for (std::uint64_t i = 0; i < total; ++i) {
    std::uint64_t r = i;
    bool outside = false;
    for (int a = 0; a < n; ++a) {
      lo[a] = static_cast<std::int64_t>(r % span) - 1;
      r /= span;
      outside |= lo[a] < 0 || lo[a] >= side;
    }
    if (outside) {
      consider(lo);
      continue;
    }
    Coords c{};
    for (int a = 0; a < n; ++a) c[a] = static_cast<std::uint64_t>(lo[a]);
    if (!G.contains(c)) consider(lo);
  }
  return best;
}

}  // namespace

TEST_SUITE("whitney") {

TEST_CASE("dyadic maximal decomposition examples") {
  const Grid g(1, 3);
  CHECK(dyadic_maximal_decomposition(cells_1d(g, {0, 1})).cubes == cubes_1d({{1, 0}}));
  CHECK(dyadic_maximal_decomposition(cells_1d(g, {5})).cubes == cubes_1d({{0, 5}}));
  CHECK(dyadic_maximal_decomposition(cells_1d(g, {1, 2})).cubes == cubes_1d({{0, 1}, {0, 2}}));
}

TEST_CASE("whitney decomposition examples") {
  const Grid g(1, 3);
  CellSet all(g);
  all.insert_cube(g.root());
  const auto d = whitney_decomposition(all);
  CHECK(d.cubes == cubes_1d({{0, 0}, {0, 1}, {0, 6}, {0, 7}, {1, 1}, {1, 2}}));
  CHECK(verify_decomposition(d).max_overlap_of_doubles <= 4);
  CHECK(verify_decomposition(d).tiles_exactly);

  CHECK(whitney_decomposition(cells_1d(g, {4})).cubes == cubes_1d({{0, 4}}));

  const Grid h(2, 4);
  CellSet two(h);
  two.insert(Coords{1, 1, 0});
  two.insert(Coords{12, 13, 0});
  const auto w = whitney_decomposition(two);
  CHECK(w.cubes.size() == 2);
  CHECK(verify_decomposition(w).max_overlap_of_doubles == 1);
}

TEST_CASE("distance to the complement matches brute force") {
  for (int n = 1; n <= 3; ++n) {
    const Grid g(n, n == 3 ? 3 : 4);
    Rng rng(n);
    for (int trial = 0; trial < 6; ++trial) {
      CellSet G(g);
      for (std::uint64_t i = 0; i < g.cell_count(); ++i)
        if (rng.uniform() < 0.8) G.insert(i);
      for (int k = 0; k <= g.root_level(); ++k)
        for (std::uint64_t i = 0; i < g.cube_count(k); ++i) {
          const DyadicCube q{k, g.coords_of(i, k)};
          CHECK(squared_distance_to_complement(G, q) == brute_dist2(G, q));
        }
    }
  }
}

TEST_CASE("both flavors tile 100 random sets with their properties") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const int n = 1 + static_cast<int>(seed % 3);
    const Grid g(n, n == 1 ? 7 : (n == 2 ? 5 : 3));
    Rng rng(seed);
    const double fill = rng.uniform();
    CellSet G(g);
    for (std::uint64_t i = 0; i < g.cell_count(); ++i)
      if (rng.uniform() < fill) G.insert(i);

    const auto dm = dyadic_maximal_decomposition(G);
    const auto dr = verify_decomposition(dm);
    CHECK(dr.tiles_exactly);
    CHECK(dr.parent_maximality);
    CHECK(dr.covered_cells == G.count());
    // maximality by brute force: the parent of each cube is not inside G
    for (const auto& q : dm.cubes) {
      if (q.level == g.root_level()) continue;
      CellSet p(g);
      p.insert_cube(q.parent());
      CHECK((p & G) != p);
    }

    const auto wd = whitney_decomposition(G);
    const auto wr = verify_decomposition(wd);
    CHECK(wr.tiles_exactly);
    CHECK(wr.max_overlap_of_doubles <= wr.overlap_bound);
    CHECK(wr.overlap_bound == (std::uint64_t{1} << (2 * n)));
    if (wr.ratio_cubes > 0) CHECK(wr.dist_ratio_min >= 1.0);
  }
}

TEST_CASE("verification catches broken decompositions") {
  const Grid g(1, 3);
  auto d = dyadic_maximal_decomposition(cells_1d(g, {0, 1, 2, 3}));
  d.cubes = cubes_1d({{1, 0}, {0, 2}});
  auto r = verify_decomposition(d);
  CHECK_FALSE(r.tiles_exactly);
  d.cubes = cubes_1d({{1, 0}, {1, 1}, {0, 1}});
  r = verify_decomposition(d);
  CHECK_FALSE(r.disjoint);
  d.cubes = cubes_1d({{1, 0}, {1, 1}});
  CHECK_FALSE(verify_decomposition(d).parent_maximality);
}

TEST_CASE("empty set and csv output") {
  const Grid g(2, 3);
  CHECK(whitney_decomposition(CellSet(g)).cubes.empty());
  CHECK(dyadic_maximal_decomposition(CellSet(g)).cubes.empty());
  CellSet s(g);
  s.insert_cube(DyadicCube{1, {1, 2, 0}});
  std::ostringstream os;
  write_decomposition_csv(os, dyadic_maximal_decomposition(s));
  CHECK(os.str() == "level,c0,c1\n1,1,2\n");
}

}
