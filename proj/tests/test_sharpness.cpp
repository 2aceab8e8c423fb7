#include <doctest.h>

#include <cmath>
#include <tuple>

#include "dyadlab/potentials.hpp"
#include "dyadlab/sharpness.hpp"

using namespace dyadlab;

TEST_SUITE("sharpness") {

TEST_CASE("delta and N") {
  const SharpExample a = build_sharp_example(0.5, 1, 0.5);
  CHECK(a.delta == doctest::Approx(0.14644661).epsilon(1e-8));
  CHECK(a.N == 13);
  const SharpExample b = build_sharp_example(1.0, 1, 0.5);
  CHECK(b.delta == doctest::Approx(0.29289322).epsilon(1e-8));
  CHECK(b.N == 6);
  CHECK_THROWS_AS(build_sharp_example(0.0, 1, 0.5), Error);
  CHECK_THROWS_AS(build_sharp_example(1.5, 1, 0.5), Error);
  CHECK_THROWS_AS(build_sharp_example(0.5, 1, 1.0), Error);
}

TEST_CASE("f is constant on annuli and carries the stated mass") {
  const SharpExample ex = build_sharp_example(0.5, 2, 1.0);
  REQUIRE(ex.dense());
  const Grid g = ex.grid();
  for (std::uint64_t i = 0; i < g.cell_count(); ++i) {
    const Coords c = g.coords_of(i);
    CHECK(ex.tree->mass(DyadicCube{0, c}) == ex.annulus_density(SharpExample::annulus_of(c, 2)));
  }
  for (int j = 1; j <= ex.N; ++j) CHECK(ex.annulus_cells(j) == 3.0 * std::ldexp(1.0, 2 * (j - 1)));
  double total = 1.0;
  for (int j = 1; j <= ex.N; ++j) total += std::ldexp(1.0, j);
  CHECK(ex.total_mass() == doctest::Approx(ex.delta * total).epsilon(1e-14));
  CHECK(ex.tree->total_mass() == doctest::Approx(ex.total_mass()).epsilon(1e-13));
  for (int k = 0; k <= ex.N; ++k)
    CHECK(ex.tree->mass(DyadicCube{k, {0, 0, 0}}) == doctest::Approx(ex.mass_of_Q(k)).epsilon(1e-13));
}

TEST_CASE("closed form against the direct sum at every cell") {
  for (auto [eps, n, alpha] : {std::tuple{0.5, 1, 0.5}, std::tuple{1.0, 1, 0.5}, std::tuple{0.7, 1, 1.5 / 2},
                               std::tuple{1.0, 2, 1.0}, std::tuple{0.9, 3, 2.0}}) {
    const SharpExample ex = build_sharp_example(eps, n, alpha);
    REQUIRE(ex.dense());
    const auto direct = eval_A_direct_field(ex);
    const Grid g = ex.grid();
    double worst = 0.0;
    for (std::uint64_t i = 0; i < g.cell_count(); ++i) {
      const double c = eval_A_closed(ex, g.coords_of(i));
      worst = std::max(worst, std::fabs(c - direct[i]) / c);
    }
    CHECK_MESSAGE(worst <= 1e-9, "eps=", eps, " n=", n);
  }
}

TEST_CASE("known values for eps = 0.5, n = 1") {
  const SharpExample ex = build_sharp_example(0.5, 1, 0.5);
  CHECK(eval_A_closed(ex, Coords{0, 0, 0}) == ex.delta * (ex.N + 1));
  CHECK(eval_A_closed(ex, Coords{0, 0, 0}) == doctest::Approx(2.05025).epsilon(1e-5));
  CHECK(eval_A_direct(ex, Coords{0, 0, 0}) == doctest::Approx(2.05025).epsilon(1e-5));
  // annulus 1 by hand: delta (2^-1/2 + (2^1/2)/1 + N - 1)
  const double a1 = ex.delta * (std::sqrt(0.5) + std::sqrt(2.0) + 12.0);
  CHECK(eval_A_closed(ex, Coords{1, 0, 0}) == doctest::Approx(a1).epsilon(1e-14));
  CHECK(eval_A_direct(ex, Coords{1, 0, 0}) == doctest::Approx(2.0680195).epsilon(1e-7));
}

TEST_CASE("annulus values strictly decrease for k >= 1") {
  for (double eps : {0.3, 0.5, 1.0}) {
    const SharpExample ex = build_sharp_example(eps, 2, 1.0);
    for (int k = 2; k <= ex.N; ++k) CHECK(eval_A_closed_annulus(ex, k) < eval_A_closed_annulus(ex, k - 1));
    CHECK(eval_A_closed_annulus(ex, ex.N) < eval_A_closed_annulus(ex, 0));
  }
}

TEST_CASE("implicit examples: no tree, annulus quantities still available") {
  const SharpExample ex = build_sharp_example(0.1, 2, 1.0);
  CHECK_FALSE(ex.dense());
  CHECK_THROWS_AS(eval_A_direct(ex, Coords{0, 0, 0}), Error);
  CHECK(eval_A_closed_annulus(ex, 0) == ex.delta * (ex.N + 1));
  const SharpnessReport r = sharpness_report(ex);
  CHECK_FALSE(r.cell_scan);
  CHECK(r.containments_pass());
}

TEST_CASE("report for the battery") {
  for (auto [eps, n, alpha] : {std::tuple{0.5, 1, 0.5}, std::tuple{0.7, 1, 0.5}, std::tuple{0.5, 2, 1.0}}) {
    const SharpnessReport r = sharpness_report(build_sharp_example(eps, n, alpha));
    CHECK(r.q0_exact);
    CHECK(r.a_dyadic);
    CHECK(r.b_containment);
    CHECK(r.c_containment);
    CHECK(r.d_ratio);
    CHECK(r.annulus_decreasing);
    CHECK(r.ratio >= r.implied_lower);
    CHECK(r.good_cells >= 1.0);
    if (n == 1) CHECK(r.ball_maximal_Q0 <= eps * (1 + 1e-9));
  }
}

TEST_CASE("k0 is the smallest cube holding {A > 1}") {
  const SharpExample ex = build_sharp_example(0.7, 1, 0.5);
  const SharpnessReport r = sharpness_report(ex);
  const auto direct = eval_A_direct_field(ex);
  int k0 = 0;
  for (std::uint64_t i = 0; i < direct.size(); ++i)
    if (direct[i] > 1.0) k0 = std::max(k0, SharpExample::annulus_of(ex.grid().coords_of(i), 1));
  CHECK(r.k0 == k0);
}

TEST_CASE("comparability with the q = 1 dyadic potential") {
  const SharpExample ex = build_sharp_example(0.5, 2, 1.0);
  const SharpnessReport r = sharpness_report(ex);
  const auto p = PotentialParams::for_grid(ex.grid(), 1.0, 1.0, true);
  const double ratio0 = eval_A_closed(ex, Coords{0, 0, 0}) / dyadic_potential(*ex.tree, p, Coords{0, 0, 0});
  CHECK(ratio0 >= r.comparability_min * (1 - 1e-12));
  CHECK(ratio0 <= r.comparability_max * (1 + 1e-12));
  CHECK(r.comparability_min == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.comparability_max == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("decay fit") {
  std::vector<std::pair<double, double>> pts{{0.4, std::exp2(-10)}, {0.5, std::exp2(-8)}, {0.7, std::exp2(-6)}};
  const DecayFit f = fit_sharpness_decay(pts, std::pair{0.6, std::exp2(-7)});
  CHECK(f.c2 > 0.0);
  CHECK(f.c1 > 0.0);
  CHECK(f.holds_on_fit);
  for (auto [e, r] : pts) CHECK(r >= f.c1 * std::exp(-f.c2 / e) * (1 - 1e-12));
  REQUIRE(f.heldout.has_value());
  CHECK(f.heldout_bound == doctest::Approx(f.c1 * std::exp(-f.c2 / 0.6)));
  CHECK(f.holds_heldout == (std::exp2(-7) >= f.heldout_bound * (1 - 1e-12)));
}

}
