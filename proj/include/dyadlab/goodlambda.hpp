#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dyadlab/measure_tree.hpp"
#include "dyadlab/potentials.hpp"
#include "dyadlab/weights.hpp"

namespace dyadlab {

enum class Flavor { Dyadic, Ball };

std::string_view to_string(Flavor f);
Flavor parse_flavor(std::string_view name);

/// Potential and maximal values on every cell for one flavor.
struct LabFields {
  Grid grid;
  PotentialParams params;
  Flavor flavor = Flavor::Dyadic;
  std::vector<double> potential;
  std::vector<double> maximal;
};

LabFields compute_fields(const MeasureTree& tree, const PotentialParams& params, Flavor flavor,
                         int threads = 1);

inline const std::vector<double> kDefaultQuantiles{0.5, 0.75, 0.9, 0.99};

/// Lower nearest-rank quantiles of the strictly positive entries: the value at
/// sorted position floor(p (m - 1)). Empty when nothing is positive.
std::vector<double> positive_quantiles(const std::vector<double>& values,
                                       const std::vector<double>& probs = kDefaultQuantiles);

/// 2^{-(alpha / eps^q)(2^q - 1)}.
double theorem_constant(double alpha, double q, double eps);
/// floor((2^q - 1) / eps^q - 1).
long long good_m(double q, double eps);

struct GoodLambdaQuery {
  double lambda = 1.0;
  double epsilon = 0.5;
  double tau = 2.0;
  void validate() const;
};

struct GoodLambdaRow {
  double epsilon = 0.0;
  double lambda = 0.0;
  double tau = 0.0;
  double numerator = 0.0;    // sigma{T > tau lambda, M <= eps lambda}
  double denominator = 0.0;  // sigma{T > lambda}
  std::uint64_t numerator_cells = 0;
  std::uint64_t denominator_cells = 0;
  double ratio = 0.0;
  double theorem_bound = 0.0;
  long long m = 0;
  bool skipped = false;  // denominator is null
};

GoodLambdaRow good_lambda_ratio(const LabFields& fields, const Weight& w, const GoodLambdaQuery& query);

struct SweepReport {
  std::vector<GoodLambdaRow> rows;  // eps in grid order, lambda ascending
  bool inconclusive = true;         // every row skipped
  // log2(ratio) = intercept + slope / eps^q over non-skipped rows with ratio > 0
  bool has_fit = false;
  std::size_t fit_rows = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double fitted_c = 0.0;  // -slope
  double fitted_C = 0.0;  // 2^intercept
  double C_cap = 0.0;
  double fitted_cap = 0.0;  // max ratio / theorem_bound over non-skipped rows
  bool within_cap = true;
};

SweepReport epsilon_sweep(const LabFields& fields, const Weight& w, const std::vector<double>& eps_grid,
                          double C_cap, double tau = 2.0,
                          const std::vector<double>& quantiles = kDefaultQuantiles);

/// eps grid {2^-1, ..., 2^-k}.
std::vector<double> dyadic_eps_grid(int k);

struct GoodTauEps {
  double epsilon = 0.0;
  std::vector<double> lambdas;
  std::optional<double> cprime;          // smallest grid value reaching ratio <= 1/2
  std::vector<double> ratios_at_cprime;  // per lambda (skipped lambdas hold 0)
  std::uint64_t skipped_lambdas = 0;
};

struct GoodTauReport {
  std::vector<GoodTauEps> per_eps;
  bool inconclusive = true;  // no lambda had a nonempty denominator
  bool all_found = false;
  double max_cprime = 0.0;
};

/// Default grid {0, 0.25, 0.5, 1, 2, ..., 2^16}.
std::vector<double> default_cprime_grid();

/// Works on T^q and M^q: ratio sigma{T^q > (1 + c' eps) lambda, M^q <= eps lambda} /
/// sigma{T^q > lambda}, lambda over quantiles of the positive T^q values.
GoodTauReport good_tau_check(const LabFields& fields, const Weight& w, const std::vector<double>& eps_grid,
                             const std::vector<double>& cprime_grid = default_cprime_grid(),
                             const std::vector<double>& quantiles = kDefaultQuantiles);

enum class NormStatus { Ok, Trivial, Violation };
std::string_view to_string(NormStatus s);

struct NormComparison {
  double p = 0.0;
  double lhs_norm = 0.0;  // ||T||_{L^p(sigma)}
  double rhs_norm = 0.0;  // ||M||_{L^p(sigma)}
  double ratio = 0.0;
  NormStatus status = NormStatus::Trivial;
};

NormComparison norm_comparison(const LabFields& fields, const Weight& w, double p);

/// A Euclidean ball in cell units (center in continuous coordinates).
struct Ball {
  std::array<double, kMaxDim> center{};
  double radius = 1.0;
  /// Cell centers within the ball scaled by `factor`.
  bool contains_center(const Coords& c, int dim, double factor = 1.0) const;
  double distance(const Coords& c, int dim) const;
};

struct ExpIntegrabilityOptions {
  double C_target = 4.0;
  std::vector<double> c_test_grid;  // empty: 0.05, 0.1, ..., 4
  int lambda_points = 24;
  double log_window_lo = 0x1p-8;  // |x| / R
  double log_window_hi = 0x1p-2;
  double log_ratio_lo = 0.1;
  double log_ratio_hi = 10.0;
  Flavor flavor = Flavor::Dyadic;
  int threads = 1;
};

struct HalvingRow {
  double lambda = 0.0;
  double sigma_lambda = 0.0;
  double sigma_2lambda = 0.0;
  double ratio = 0.0;
  double bound = 0.0;  // exp(-c lambda^q) at the fitted c
};

struct ExpIntegrabilityReport {
  bool inconclusive = true;
  double maximal_norm = 0.0;  // sup of M over cells of B before normalization
  double mass_B = 0.0;        // normalized
  double threshold = 0.0;     // ((n - alpha) q)^{1/q} mu(B) / R^{n-alpha}
  double max_T_outside_2B = 0.0;
  bool containment = false;
  std::vector<HalvingRow> halving;
  double fitted_c = 0.0;
  bool halving_holds = false;  // fitted_c > 0 and every row obeys its bound
  std::vector<std::pair<double, double>> averages;  // (c_test, mean of exp(c T^q) over 2B)
  double largest_c_test = 0.0;                      // 0 if none stays below C_target
  double power_fit_s = 0.0;
  double power_fit_r2 = 0.0;
  std::uint64_t window_cells = 0;
  double window_ratio_min = 0.0;  // T / log(1/|x|) over the window
  double window_ratio_max = 0.0;
  bool window_ok = false;
};

/// `tree` should carry mu restricted to B. Fields are evaluated on the whole
/// grid; level sets and averages are taken over the cells of 2B.
ExpIntegrabilityReport exp_integrability_check(const MeasureTree& tree, const PotentialParams& params,
                                               const Weight& w, const Ball& B,
                                               const ExpIntegrabilityOptions& opt = {});

// Generators -----------------------------------------------------------------

/// Uniform count in [min_atoms, max_atoms], uniform cells, masses uniform in (0, 1].
MeasureTree random_sparse_measure(const Grid& grid, std::uint64_t seed, int min_atoms = 8,
                                  int max_atoms = 64);
MeasureTree random_atoms_measure(const Grid& grid, std::uint64_t count, std::uint64_t seed);
/// |x - center|^{exponent} (x in units of the radius) times the cell volume
/// R^{-n}, on cells whose center lies in B.
MeasureTree radial_power_measure(const Grid& grid, const Ball& B, double exponent = -1.0);

}  // namespace dyadlab
