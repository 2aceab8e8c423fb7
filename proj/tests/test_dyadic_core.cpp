#include <doctest.h>

#include <sstream>

#include "oracles.hpp"

using namespace dyadlab;

TEST_SUITE("dyadic_core") {

TEST_CASE("empty measure has zero mass everywhere") {
  const Grid g(2, 3);
  const MeasureTree t = MeasureTree::build(g, {});
  CHECK(t.total_mass() == 0.0);
  for (int k = 0; k <= 3; ++k)
    for (std::uint64_t i = 0; i < g.cube_count(k); ++i) CHECK(t.mass_at(k, i) == 0.0);
}

TEST_CASE("single atom and parent sums in 1-D") {
  const Grid g(1, 3);
  std::vector<Atom> a{{Coords{0, 0, 0}, 3.0}};
  const MeasureTree t = MeasureTree::build(g, a);
  CHECK(t.mass(g.root()) == 3.0);
  CHECK(t.mass(DyadicCube{0, {0, 0, 0}}) == 3.0);
  CHECK(t.mass(DyadicCube{0, {1, 0, 0}}) == 0.0);

  std::vector<Atom> b{{Coords{0, 0, 0}, 1.0}, {Coords{4, 0, 0}, 2.0}};
  const MeasureTree u = MeasureTree::build(g, b);
  CHECK(u.mass(DyadicCube{2, {0, 0, 0}}) == 1.0);
  CHECK(u.mass(DyadicCube{2, {1, 0, 0}}) == 2.0);
  CHECK(u.total_mass() == 3.0);

  std::vector<Atom> c{{Coords{0, 0, 0}, 1.0}, {Coords{1, 0, 0}, 2.0}};
  CHECK(MeasureTree::build(g, c).mass(DyadicCube{1, {0, 0, 0}}) == 3.0);
}

TEST_CASE("atoms in one cell accumulate") {
  const Grid g(2, 2);
  std::vector<Atom> a{{Coords{1, 2, 0}, 0.25}, {Coords{1, 2, 0}, 0.5}};
  CHECK(MeasureTree::build(g, a).mass(DyadicCube{0, {1, 2, 0}}) == 0.75);
}

TEST_CASE("cube_mass matches a brute-force cell scan on every cube") {
  for (int n = 1; n <= 3; ++n) {
    const int J = n == 3 ? 3 : 5;
    const Grid g(n, J);
    const auto atoms = oracle::random_atoms(g, 40, 7 + n);
    const MeasureTree t = MeasureTree::build(g, atoms);
    for (int k = 0; k <= J; ++k)
      for (std::uint64_t i = 0; i < g.cube_count(k); ++i) {
        const DyadicCube q{k, g.coords_of(i, k)};
        CHECK(oracle::rel_err(t.mass(q), oracle::cube_mass(atoms, q)) <= 1e-14);
      }
  }
}

TEST_CASE("parent mass is the sum of the children over 100 random trees") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const Grid g(2, 4);
    const MeasureTree t = MeasureTree::build(g, oracle::random_atoms(g, 1 + seed % 30, seed));
    bool ok = true;
    for (int k = 1; k <= 4; ++k)
      for (std::uint64_t i = 0; i < g.cube_count(k); ++i) {
        const DyadicCube q{k, g.coords_of(i, k)};
        double s = 0.0;
        for (const auto& c : g.children(q)) s += t.mass(c);
        ok &= s == t.mass(q);
      }
    CHECK(ok);
  }
}

TEST_CASE("sparse storage agrees with dense bit for bit") {
  const Grid big(1, 30);
  CHECK_FALSE(big.dense_ok());
  std::vector<Atom> atoms{{Coords{5, 0, 0}, 1.5}, {Coords{(1u << 29) + 3, 0, 0}, 2.25}, {Coords{6, 0, 0}, 0.125}};
  const MeasureTree t = MeasureTree::build(big, atoms);
  CHECK_FALSE(t.is_dense());
  CHECK(t.total_mass() == 1.5 + 0.125 + 2.25);
  CHECK(t.mass(DyadicCube{29, {0, 0, 0}}) == 1.625);
  CHECK(t.mass(DyadicCube{29, {1, 0, 0}}) == 2.25);
  CHECK(t.mass(DyadicCube{3, {0, 0, 0}}) == 1.625);
  CHECK(t.mass(DyadicCube{0, {7, 0, 0}}) == 0.0);
  CHECK(t.nonzero_cells() == 3);
}

TEST_CASE("common ancestor level examples and properties") {
  const Grid g(1, 4);
  const DyadicCube a{0, {0, 0, 0}};
  CHECK(common_ancestor_level(g, a, Coords{0, 0, 0}) == 0);
  CHECK(common_ancestor_level(g, a, Coords{1, 0, 0}) == 1);
  CHECK(common_ancestor_level(g, a, Coords{2, 0, 0}) == 2);
  CHECK_THROWS_AS(common_ancestor_level(g, a, Coords{16, 0, 0}), Error);

  const Grid h(2, 4);
  for (std::uint64_t i = 0; i < h.cell_count(); ++i)
    for (std::uint64_t j = 0; j < h.cell_count(); ++j) {
      const Coords x = h.coords_of(i), y = h.coords_of(j);
      const int l = common_ancestor_level(DyadicCube{0, x}, y);
      CHECK(l == common_ancestor_level(DyadicCube{0, y}, x));
      // exhaustive ancestor walk
      int walk = 0;
      while (h.ancestor(x, walk) != h.ancestor(y, walk)) ++walk;
      CHECK(l == walk);
    }
  // moving x farther along an axis never lowers the level
  for (std::uint64_t d = 1; d < 16; ++d)
    CHECK(common_ancestor_level(a, Coords{d, 0, 0}) >= common_ancestor_level(a, Coords{d - 1, 0, 0}));
}

TEST_CASE("bad input is rejected") {
  CHECK_THROWS_AS(Grid(4, 2), Error);
  const Grid g(2, 3);
  std::vector<Atom> neg{{Coords{0, 0, 0}, -1.0}};
  CHECK_THROWS_AS(MeasureTree::build(g, neg), Error);
  std::vector<Atom> out{{Coords{8, 0, 0}, 1.0}};
  CHECK_THROWS_AS(MeasureTree::build(g, out), Error);
  const MeasureTree t = MeasureTree::build(g, {});
  CHECK_THROWS_AS(t.mass(DyadicCube{4, {0, 0, 0}}), Error);
}

TEST_CASE("measure text format round trips") {
  const Grid g(2, 3);
  const auto atoms = oracle::random_atoms(g, 10, 3);
  const MeasureTree t = MeasureTree::build(g, atoms);
  std::stringstream ss;
  write_measure(ss, t);
  const MeasureTree u = read_measure(ss);
  CHECK(u.grid() == g);
  CHECK(u.cell_masses() == t.cell_masses());

  std::istringstream bad("n=2 J=3\n1 2\n");
  CHECK_THROWS_AS(read_measure(bad), Error);
  std::istringstream ok("# comment\nn=1 J=2\n\n3 0.1\n");
  CHECK(read_measure(ok).mass(DyadicCube{0, {3, 0, 0}}) == 0.1);
}

TEST_CASE("rng is reproducible and streams are order independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng s3 = Rng::stream(9, 3);
  const auto first = s3.next();
  Rng::stream(9, 1).next();
  CHECK(Rng::stream(9, 3).next() == first);
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.below(7) < 7);
  }
}

}
