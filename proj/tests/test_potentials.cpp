#include <doctest.h>

#include <sstream>

#include "oracles.hpp"

using namespace dyadlab;

namespace {

MeasureTree unit_atom(const Grid& g, const Coords& c) {
  std::vector<Atom> a{{c, 1.0}};
  return MeasureTree::build(g, a);
}

}  // namespace

TEST_SUITE("potentials") {

TEST_CASE("zero measure gives zero for every operator") {
  const Grid g(2, 4);
  const MeasureTree t = MeasureTree::build(g, {});
  const auto p = PotentialParams::for_grid(g, 1.0, 1.0, true);
  const PotentialEvaluator ev(t, p);
  for (Operator op : {Operator::DyadicPotential, Operator::BallPotential, Operator::DyadicMaximal,
                      Operator::BallMaximal, Operator::Shell}) {
    const Field f = potential_field(ev, op, 1, 2);
    for (double v : f.values) CHECK(v == 0.0);
  }
}

TEST_CASE("unit atom at x: geometric sums") {
  const Grid g(1, 10);
  const Coords x{37, 0, 0};
  const MeasureTree t = unit_atom(g, x);
  auto p = PotentialParams::for_grid(g, 0.5, 1.0);
  double expect = 0.0;
  for (int k = 0; k <= 10; ++k) expect += std::pow(2.0, -k / 2.0);
  CHECK(dyadic_potential(t, p, x) == doctest::Approx(expect).epsilon(1e-13));
  CHECK(dyadic_potential(t, p, x) == doctest::Approx(3.338769).epsilon(1e-6));
  CHECK(ball_potential_F(t, p, x) == doctest::Approx(expect).epsilon(1e-13));
  CHECK(fractional_maximal_dyadic(t, p, x) == 1.0);
  CHECK(fractional_maximal_ball(t, p, x) == 1.0);
  p.q = 2.0;
  CHECK(dyadic_potential(t, p, x) == doctest::Approx(std::sqrt(2.0 - std::pow(2.0, -10))).epsilon(1e-13));
  CHECK(dyadic_potential(t, p, x) == doctest::Approx(1.413869).epsilon(1e-6));
}

TEST_CASE("shell function") {
  const Grid g(1, 6);
  const auto p = PotentialParams::for_grid(g, 0.5, 1.0);
  const MeasureTree t = unit_atom(g, Coords{2, 0, 0});
  CHECK(shell_function_g(t, p, 2, Coords{0, 0, 0}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(shell_function_g(t, p, 2, Coords{5, 0, 0}) == 0.0);
  CHECK(shell_function_g(t, p, 0, Coords{2, 0, 0}) == 1.0);
  CHECK_THROWS_AS(shell_function_g(t, p, 7, Coords{0, 0, 0}), Error);
}

TEST_CASE("ball potential of an atom at distance 5 starts at j = 3") {
  const Grid g(1, 6);
  const Coords x{10, 0, 0};
  const MeasureTree t = unit_atom(g, Coords{15, 0, 0});
  const auto p = PotentialParams::for_grid(g, 0.5, 1.0);
  const PotentialEvaluator ev(t, p);
  for (int j = 0; j <= 2; ++j) CHECK(ev.ball_mass(x, j) == 0.0);
  CHECK(ev.ball_mass(x, 3) == 1.0);
  double expect = 0.0;
  for (int j = 3; j <= 6; ++j) expect += std::pow(2.0, -j / 2.0);
  CHECK(ev.ball_potential(x) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("uniform density: dyadic maximal attained at the root") {
  const Grid g(1, 10);
  const MeasureTree t = MeasureTree::from_cell_masses(g, std::vector<double>(g.cell_count(), 1.0));
  const auto p = PotentialParams::for_grid(g, 0.5, 1.0);
  CHECK(fractional_maximal_dyadic(t, p, Coords{123, 0, 0}) == doctest::Approx(32.0).epsilon(1e-14));
}

TEST_CASE("ball maximal of a measure on B, far away, is bounded by mass over distance") {
  const Grid g(2, 6);
  std::vector<Atom> atoms;
  for (std::uint64_t i = 0; i < 4; ++i)
    for (std::uint64_t j = 0; j < 4; ++j) atoms.push_back({Coords{i, j, 0}, 0.25});
  const MeasureTree t = MeasureTree::build(g, atoms);
  const auto p = PotentialParams::for_grid(g, 1.0, 1.0);
  const Coords x{60, 60, 0};
  const double dist = std::hypot(57.0, 57.0);
  const double v = fractional_maximal_ball(t, p, x);
  CHECK(v <= t.total_mass() / std::pow(dist, 1.0) * 2.0);
  CHECK(v == doctest::Approx(oracle::sup(oracle::ball_terms(atoms, g, p, x))).epsilon(1e-14));
}

TEST_CASE("tree potentials agree with brute force on n = 1, 2, 3") {
  const std::pair<int, int> shapes[] = {{1, 9}, {2, 5}, {3, 3}};
  for (auto [n, J] : shapes) {
    const Grid g(n, J);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto atoms = oracle::random_atoms(g, 25, seed * 11 + n);
      const MeasureTree t = MeasureTree::build(g, atoms);
      for (double q : {0.5, 1.0, 2.0})
        for (double alpha : {0.5, n - 0.5}) {
          for (bool tail : {false, true}) {
            const auto p = PotentialParams::for_grid(g, alpha, q, tail);
            const PotentialEvaluator ev(t, p);
            Rng rng(seed);
            for (int s = 0; s < 20; ++s) {
              Coords x{};
              for (int d = 0; d < n; ++d) x[d] = rng.below(g.side_at(0));
              CHECK(oracle::rel_err(ev.dyadic_potential(x), oracle::dyadic_potential(atoms, g, p, x)) <= 1e-12);
              CHECK(ev.dyadic_maximal(x) == doctest::Approx(oracle::dyadic_maximal(atoms, g, p, x)).epsilon(1e-14));
              if (!tail) {
                const auto bt = oracle::ball_terms(atoms, g, p, x);
                CHECK(oracle::rel_err(ev.ball_potential(x), oracle::lq(bt, q)) <= 1e-12);
                CHECK(ev.ball_maximal(x) == doctest::Approx(oracle::sup(bt)).epsilon(1e-14));
              }
            }
          }
        }
    }
  }
}

TEST_CASE("ball masses: every radius, every path, against enumeration") {
  const Grid g(2, 5);
  const auto atoms = oracle::random_atoms(g, 200, 5);
  const MeasureTree t = MeasureTree::build(g, atoms);
  const PotentialEvaluator ev(t, PotentialParams::for_grid(g, 1.0, 1.0));
  for (std::uint64_t i = 0; i < g.cell_count(); i += 7) {
    const Coords x = g.coords_of(i);
    for (int j = 0; j <= 6; ++j)
      CHECK(ev.ball_mass(x, j) == doctest::Approx(oracle::ball_mass(atoms, 2, x, std::ldexp(1.0, j))).epsilon(1e-14));
  }
  // sparse grid goes through the atom path
  const Grid big(2, 13);
  const auto few = oracle::random_atoms(big, 30, 6);
  const MeasureTree s = MeasureTree::build(big, few);
  const PotentialEvaluator es(s, PotentialParams::for_grid(big, 1.0, 1.0));
  for (int j = 0; j <= 13; ++j)
    CHECK(es.ball_mass(few[0].cell, j) ==
          doctest::Approx(oracle::ball_mass(few, 2, few[0].cell, std::ldexp(1.0, j))).epsilon(1e-14));
}

TEST_CASE("supercube tail matches a level by level sum") {
  const Grid g(2, 4);
  const auto atoms = oracle::random_atoms(g, 12, 2);
  const MeasureTree t = MeasureTree::build(g, atoms);
  for (double alpha : {0.5, 1.0, 1.5})
    for (double q : {0.5, 1.0, 2.0}) {
      const auto p = PotentialParams::for_grid(g, alpha, q, true);
      const PotentialEvaluator ev(t, p);
      const double e = 2.0 - alpha;
      double sixty = 0.0, full = 0.0;
      for (int k = 5; k <= 64; ++k) sixty += std::pow(t.total_mass() * std::pow(2.0, -k * e), q);
      for (int k = 5; k <= 4 + oracle::tail_levels(q, e); ++k) full += std::pow(t.total_mass() * std::pow(2.0, -k * e), q);
      CHECK(oracle::rel_err(ev.supercube_tail_power(), full) <= 1e-12);
      // 60 levels are enough once each level shrinks the term by 2^-1 or more
      if (q * e >= 1.0) CHECK(oracle::rel_err(ev.supercube_tail_power(), sixty) <= 1e-12);
    }
}

TEST_CASE("domination, homogeneity and monotonicity") {
  const Grid g(2, 5);
  const auto atoms = oracle::random_atoms(g, 30, 9);
  const MeasureTree t = MeasureTree::build(g, atoms);
  for (double q : {0.5, 1.0, 3.0}) {
    const auto p = PotentialParams::for_grid(g, 1.0, q, true);
    const PotentialEvaluator ev(t, p);
    const auto [pot, max] = potential_and_maximal_fields(ev, false);
    for (std::size_t i = 0; i < pot.values.size(); ++i) CHECK(max.values[i] <= pot.values[i]);
  }
  const auto p = PotentialParams::for_grid(g, 1.0, 1.5, true);
  const PotentialEvaluator ev(t, p);
  for (double c : {0.0, 0.5, 2.0}) {
    const MeasureTree tc = t.scaled(c);
    const PotentialEvaluator ec(tc, p);
    for (Operator op : {Operator::DyadicPotential, Operator::BallPotential, Operator::DyadicMaximal,
                        Operator::BallMaximal, Operator::Shell}) {
      const Field a = potential_field(ev, op, 1, 1), b = potential_field(ec, op, 1, 1);
      bool exact = true;
      for (std::size_t i = 0; i < a.values.size(); ++i) exact &= b.values[i] == c * a.values[i];
      CHECK_MESSAGE(exact, to_string(op), " c=", c);
    }
  }
  // adding an atom never decreases anything
  auto more = atoms;
  more.push_back({Coords{3, 3, 0}, 0.7});
  const MeasureTree t2 = MeasureTree::build(g, more);
  const PotentialEvaluator e2(t2, p);
  for (Operator op : {Operator::DyadicPotential, Operator::BallPotential, Operator::DyadicMaximal,
                      Operator::BallMaximal}) {
    const Field a = potential_field(ev, op), b = potential_field(e2, op);
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(b.values[i] >= a.values[i] * (1 - 1e-15));
  }
}

TEST_CASE("field equals single-point calls and is thread independent") {
  const Grid g(2, 6);
  const MeasureTree t = MeasureTree::build(g, oracle::random_atoms(g, 50, 4));
  const auto p = PotentialParams::for_grid(g, 0.5, 2.0, true);
  const PotentialEvaluator ev(t, p);
  for (Operator op : {Operator::DyadicPotential, Operator::BallPotential, Operator::BallMaximal}) {
    const Field one = potential_field(ev, op, 1), four = potential_field(ev, op, 4);
    CHECK(one.values == four.values);
    Rng rng(8);
    for (int s = 0; s < 100; ++s) {
      const std::uint64_t i = rng.below(g.cell_count());
      CHECK(one.values[i] == ev.evaluate(op, g.coords_of(i)));
    }
  }
}

TEST_CASE("parameter validation") {
  const Grid g(2, 4);
  const MeasureTree t = MeasureTree::build(g, {});
  CHECK_THROWS_AS(PotentialParams::for_grid(g, 2.0, 1.0), Error);
  CHECK_THROWS_AS(PotentialParams::for_grid(g, 1.0, 0.0), Error);
  auto p = PotentialParams::for_grid(g, 1.0, 1.0);
  p.alpha = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = PotentialParams::for_grid(g, 1.0, 1.0);
  p.level_min = 3;
  p.level_max = 2;
  CHECK_THROWS_AS(p.validate(), Error);
  p = PotentialParams::for_grid(g, 1.0, 1.0, true);
  p.level_max = 2;
  CHECK_THROWS_AS(p.validate_for(g), Error);
  CHECK_THROWS_AS(dyadic_potential(t, PotentialParams::for_grid(g, 1.0, 1.0), Coords{16, 0, 0}), Error);
  CHECK(parse_operator("ball-maximal") == Operator::BallMaximal);
  CHECK_THROWS_AS(parse_operator("nope"), Error);
}

TEST_CASE("field csv layout") {
  const Grid g(2, 1);
  const MeasureTree t = unit_atom(g, Coords{1, 0, 0});
  std::ostringstream os;
  write_field_csv(os, potential_field(t, PotentialParams::for_grid(g, 1.0, 1.0), Operator::DyadicMaximal), "m");
  CHECK(os.str() == "c0,c1,m\n0,0,0.5\n1,0,1\n0,1,0.5\n1,1,0.5\n");
}

}
