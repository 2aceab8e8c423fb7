#include "experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "dyadlab/goodlambda.hpp"
#include "dyadlab/measure_tree.hpp"
#include "dyadlab/potentials.hpp"
#include "dyadlab/rng.hpp"
#include "dyadlab/sharpness.hpp"
#include "dyadlab/weights.hpp"
#include "dyadlab/whitney.hpp"

namespace dyadlab::cli {

using json = nlohmann::ordered_json;

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

int RunResult::exit_code() const {
  switch (overall) {
    case Verdict::Pass: return 0;
    case Verdict::Fail: return 1;
    case Verdict::Inconclusive: return 2;
  }
  return 1;
}

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"potential-field", "goodlambda-sweep", "goodtau", "norms",
                                          "expint", "sharpness", "whitney", "ainfty-check"};
  return k;
}

const std::vector<std::string>& module_operations() {
  static const std::vector<std::string> ops{
      "build_measure", "cube_mass", "common_ancestor_level",
      "dyadic_potential", "shell_function_g", "ball_potential_F", "fractional_maximal_dyadic",
      "fractional_maximal_ball", "potential_field",
      "sigma_measure", "check_weak_ainfty",
      "dyadic_maximal_decomposition", "whitney_decomposition", "verify_decomposition",
      "good_lambda_ratio", "epsilon_sweep", "good_tau_check", "norm_comparison",
      "exp_integrability_check",
      "build_sharp_example", "eval_A_closed", "eval_A_direct", "sharpness_report",
      "run_config"};
  return ops;
}

const std::vector<std::string>& operations_for(const std::string& kind) {
  static const std::map<std::string, std::vector<std::string>> table{
      {"potential-field",
       {"build_measure", "cube_mass", "potential_field", "dyadic_potential", "shell_function_g",
        "ball_potential_F", "fractional_maximal_dyadic", "fractional_maximal_ball"}},
      {"goodlambda-sweep",
       {"build_measure", "potential_field", "sigma_measure", "good_lambda_ratio", "epsilon_sweep"}},
      {"goodtau", {"build_measure", "potential_field", "sigma_measure", "good_tau_check"}},
      {"norms", {"build_measure", "potential_field", "norm_comparison"}},
      {"expint", {"potential_field", "exp_integrability_check"}},
      {"sharpness",
       {"build_sharp_example", "eval_A_closed", "eval_A_direct", "common_ancestor_level",
        "sharpness_report"}},
      {"whitney",
       {"build_measure", "potential_field", "dyadic_maximal_decomposition", "whitney_decomposition",
        "verify_decomposition"}},
      {"ainfty-check", {"sigma_measure", "check_weak_ainfty"}},
  };
  auto it = table.find(kind);
  if (it == table.end()) throw UsageError("unknown experiment kind '" + kind + "'");
  return it->second;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json cube_json(const DyadicCube& q, int dim) {
  json c = json::array();
  for (int a = 0; a < dim; ++a) c.push_back(q.coords[a]);
  return json{{"level", q.level}, {"coords", c}};
}

// JSON has no infinities; they are written as strings.
json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

Coords parse_coords(const std::string& text, const Grid& g, const char* what) {
  const auto v = parse_doubles(text);
  if (static_cast<int>(v.size()) != g.dim())
    throw UsageError(std::string(what) + ": expected " + std::to_string(g.dim()) + " coordinates");
  Coords c{};
  for (int a = 0; a < g.dim(); ++a) {
    if (v[a] < 0 || v[a] != std::floor(v[a])) throw UsageError(std::string(what) + ": coordinates must be integers >= 0");
    c[a] = static_cast<std::uint64_t>(v[a]);
  }
  if (!g.contains_cell(c)) throw UsageError(std::string(what) + ": cell outside the root cube");
  return c;
}

struct Ctx {
  const Config& cfg;
  RunResult& out;
  std::uint64_t seed;
  int threads;

  void use(const char* op) { out.operations.insert(op); }
  void verdict(const std::string& name, Verdict v, const std::string& detail = "") {
    out.lines.push_back("VERDICT " + name + ": " + to_string(v) + (detail.empty() ? "" : " (" + detail + ")"));
    out.report["verdicts"][name] = to_string(v);
    if (v == Verdict::Fail) out.overall = Verdict::Fail;
    else if (v == Verdict::Inconclusive && out.overall == Verdict::Pass) out.overall = Verdict::Inconclusive;
  }
  void info(const std::string& line) { out.lines.push_back(line); }
};

// Measure sources ------------------------------------------------------------

struct MeasureSpec {
  std::string source;
  int n = 2, J = 6;
  std::uint64_t atoms = 1000;
  int min_atoms = 8, max_atoms = 64;
  std::string path;
  Ball ball;
  double exponent = -1.0;
  double sharp_eps = 0.5, sharp_alpha = 0.5;
  int sharp_n = 1;
};

struct MeasureDefaults {
  std::string source = "random-sparse";
  int n = 2, J = 6;
};

MeasureSpec read_measure_spec(const Config& cfg, const MeasureDefaults& d) {
  MeasureSpec m;
  m.source = cfg.get_string("measure.source", d.source);
  m.n = static_cast<int>(cfg.get_int("measure.n", d.n));
  m.J = static_cast<int>(cfg.get_int("measure.J", d.J));
  m.atoms = cfg.get_u64("measure.atoms", 1000);
  m.min_atoms = static_cast<int>(cfg.get_int("measure.min_atoms", 8));
  m.max_atoms = static_cast<int>(cfg.get_int("measure.max_atoms", 64));
  m.path = cfg.get_string("measure.path", "");
  m.exponent = cfg.get_double("measure.exponent", -1.0);
  const double side = std::ldexp(1.0, std::max(0, m.J));
  const auto center = cfg.get_doubles("ball.center", std::vector<double>(std::max(m.n, 1), side / 2));
  m.ball.radius = cfg.get_double("ball.radius", side / 4);
  for (std::size_t a = 0; a < center.size() && a < static_cast<std::size_t>(kMaxDim); ++a) m.ball.center[a] = center[a];
  if (static_cast<int>(center.size()) != m.n) throw UsageError("ball.center: expected n coordinates");
  m.sharp_eps = cfg.get_double("sharpness.epsilon", 0.5);
  m.sharp_n = static_cast<int>(cfg.get_int("sharpness.n", 1));
  m.sharp_alpha = cfg.get_double("sharpness.alpha", 0.5);
  static const std::set<std::string> known{"random-sparse", "random-atoms", "radial-power", "sharp", "zero", "file"};
  if (!known.count(m.source))
    throw UsageError("measure.source: unknown source '" + m.source +
                     "' (random-sparse | random-atoms | radial-power | sharp | zero | file)");
  if (m.source == "file" && m.path.empty()) throw UsageError("measure.path: required for source = file");
  if (m.source == "file" && !std::filesystem::exists(m.path))
    throw UsageError("measure.path: file '" + m.path + "' does not exist");
  return m;
}

// Grid the measure will live on (validated before any computation).
Grid measure_grid(const MeasureSpec& m) {
  try {
    if (m.source == "file") return read_measure_file(m.path).grid();
    if (m.source == "sharp") {
      const SharpExample ex = build_sharp_example(m.sharp_eps, m.sharp_n, m.sharp_alpha);
      if (!ex.dense()) throw Error("measure.source = sharp needs a dense example (2^{nN} <= 2^24)");
      return ex.tree->grid();
    }
    return Grid(m.n, m.J);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

MeasureTree make_measure(Ctx& ctx, const MeasureSpec& m, const Grid& g) {
  if (m.source == "file") {
    ctx.use("build_measure");
    return read_measure_file(m.path);
  }
  if (m.source == "sharp") {
    ctx.use("build_sharp_example");
    return *build_sharp_example(m.sharp_eps, m.sharp_n, m.sharp_alpha).tree;
  }
  if (m.source == "radial-power") return radial_power_measure(g, m.ball, m.exponent);
  ctx.use("build_measure");
  if (m.source == "zero") return MeasureTree::build(g, {});
  if (m.source == "random-atoms") return random_atoms_measure(g, m.atoms, ctx.seed);
  return random_sparse_measure(g, ctx.seed, m.min_atoms, m.max_atoms);
}

json measure_json(const MeasureSpec& m, const MeasureTree& t) {
  return json{{"source", m.source},
              {"n", t.dim()},
              {"J", t.root_level()},
              {"storage", t.is_dense() ? "dense" : "sparse"},
              {"nonzero_cells", t.nonzero_cells()},
              {"total_mass", t.total_mass()}};
}

PotentialParams read_params(const Config& cfg, const Grid& g, double alpha, double q, bool tail) {
  PotentialParams p;
  p.dim = g.dim();
  p.alpha = cfg.get_double("params.alpha", alpha);
  p.q = cfg.get_double("params.q", q);
  p.level_min = static_cast<int>(cfg.get_int("params.level_min", 0));
  p.level_max = static_cast<int>(cfg.get_int("params.level_max", g.root_level()));
  p.include_supercube_tail = cfg.get_bool("params.tail", tail);
  try {
    p.validate_for(g);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return p;
}

json params_json(const PotentialParams& p) {
  return json{{"n", p.dim}, {"alpha", p.alpha}, {"q", p.q}, {"level_min", p.level_min},
              {"level_max", p.level_max}, {"supercube_tail", p.include_supercube_tail}};
}

Flavor read_flavor(const Config& cfg, const std::string& key, const std::string& fallback) {
  try {
    return parse_flavor(cfg.get_string(key, fallback));
  } catch (const Error& e) {
    throw UsageError(key + ": " + e.what());
  }
}

Weight read_weight(const Config& cfg, const Grid& g) {
  const std::string spec = cfg.get_string("weight.spec", "constant");
  const auto theta = cfg.get_optional("weight.claim_theta");
  const auto C = cfg.get_optional("weight.claim_C");
  try {
    Weight w = parse_weight_spec(spec, g);
    if (theta || C) {
      if (!theta || !C) throw Error("weight: claim_theta and claim_C go together");
      w = w.with_claim(parse_double(*theta), parse_double(*C));
    }
    return w;
  } catch (const Error& e) {
    throw UsageError(std::string("weight: ") + e.what());
  }
}

std::vector<double> check_eps(const std::vector<double>& eps, const char* key) {
  if (eps.empty()) throw UsageError(std::string(key) + ": empty list");
  for (double e : eps)
    if (!(e > 0.0 && e < 1.0)) throw UsageError(std::string(key) + ": every epsilon must lie in (0, 1)");
  return eps;
}

std::vector<double> check_quantiles(const std::vector<double>& qs) {
  for (double p : qs)
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("quantiles must lie in [0, 1]");
  return qs;
}

LabFields fields_for(Ctx& ctx, const MeasureTree& t, const PotentialParams& p, Flavor f) {
  ctx.use("potential_field");
  return compute_fields(t, p, f, ctx.threads);
}

// Experiments ----------------------------------------------------------------

void potential_field_exp(Ctx& ctx) {
  const Config& cfg = ctx.cfg;
  const MeasureSpec ms = read_measure_spec(cfg, {"random-sparse", 2, 6});
  const Grid g = measure_grid(ms);
  const PotentialParams p = read_params(cfg, g, 1.0, 1.0, false);
  std::vector<Operator> ops;
  {
    const std::string list = cfg.get_string("field.operators", "dyadic-potential,dyadic-maximal,ball-potential,ball-maximal");
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok.erase(0, tok.find_first_not_of(' '));
      tok.erase(tok.find_last_not_of(' ') + 1);
      try {
        ops.push_back(parse_operator(tok));
      } catch (const Error& e) {
        throw UsageError(std::string("field.operators: ") + e.what());
      }
    }
  }
  const int shell_level = static_cast<int>(cfg.get_int("field.shell_level", p.level_min));
  if (shell_level < p.level_min || shell_level > std::min(p.level_max, g.root_level()))
    throw UsageError("field.shell_level: outside the level range");
  Coords probe{};
  for (int a = 0; a < g.dim(); ++a) probe[a] = g.side_at(0) / 2;
  if (auto s = cfg.get_optional("field.probe")) probe = parse_coords(*s, g, "field.probe");
  if (!g.dense_ok()) throw UsageError("potential-field: grid too large for per-cell fields");
  cfg.reject_unused();

  const MeasureTree t = make_measure(ctx, ms, g);
  ctx.out.report["measure"] = measure_json(ms, t);
  ctx.out.report["params"] = params_json(p);
  ctx.use("cube_mass");
  ctx.out.report["root_mass"] = t.mass(g.root());
  ctx.out.report["probe_cell_mass"] = t.mass(DyadicCube{0, probe});

  ctx.use("dyadic_potential");
  ctx.use("shell_function_g");
  ctx.use("ball_potential_F");
  ctx.use("fractional_maximal_dyadic");
  ctx.use("fractional_maximal_ball");
  json pr = json::array();
  for (int a = 0; a < g.dim(); ++a) pr.push_back(probe[a]);
  ctx.out.report["probe"] = {{"cell", pr},
                             {"dyadic_potential", dyadic_potential(t, p, probe)},
                             {"shell_level", shell_level},
                             {"shell_function_g", shell_function_g(t, p, shell_level, probe)},
                             {"ball_potential_F", ball_potential_F(t, p, probe)},
                             {"fractional_maximal_dyadic", fractional_maximal_dyadic(t, p, probe)},
                             {"fractional_maximal_ball", fractional_maximal_ball(t, p, probe)}};

  const PotentialEvaluator eval(t, p);
  ctx.use("potential_field");
  json files = json::array();
  for (Operator op : ops) {
    const Field f = potential_field(eval, op, ctx.threads, shell_level);
    std::ostringstream csv;
    write_field_csv(csv, f, std::string(to_string(op)));
    const std::string name = "field_" + std::string(to_string(op)) + ".csv";
    ctx.out.tables.emplace_back(name, csv.str());
    files.push_back(name);
  }
  ctx.out.report["fields"] = files;

  const auto [pot, max] = potential_and_maximal_fields(eval, false, ctx.threads);
  std::uint64_t bad = 0;
  for (std::size_t i = 0; i < pot.values.size(); ++i)
    if (max.values[i] > pot.values[i]) ++bad;
  ctx.out.report["domination_failures"] = bad;
  ctx.verdict("pointwise domination M <= T", bad == 0 ? Verdict::Pass : Verdict::Fail,
              std::to_string(bad) + " cells violate");
}

struct LabSetup {
  MeasureSpec ms;
  Grid grid;
  PotentialParams params;
  Flavor flavor;
};

LabSetup lab_setup(const Config& cfg, MeasureDefaults d, double alpha) {
  LabSetup s;
  s.ms = read_measure_spec(cfg, d);
  s.grid = measure_grid(s.ms);
  if (!s.grid.dense_ok()) throw UsageError("grid too large for per-cell fields");
  s.params = read_params(cfg, s.grid, alpha, 1.0, true);
  s.flavor = read_flavor(cfg, "params.flavor", "dyadic");
  return s;
}

void goodlambda_exp(Ctx& ctx) {
  const Config& cfg = ctx.cfg;
  LabSetup s = lab_setup(cfg, {"random-sparse", 2, 8}, 1.0);
  const Weight w = read_weight(cfg, s.grid);
  const auto eps = check_eps(cfg.get_doubles("sweep.eps", dyadic_eps_grid(8)), "sweep.eps");
  const auto qs = check_quantiles(cfg.get_doubles("sweep.quantiles", kDefaultQuantiles));
  const double tau = cfg.get_double("sweep.tau", 2.0);
  const double cap = cfg.get_double("sweep.C_cap", 1024.0);
  if (!(tau > 1.0)) throw UsageError("sweep.tau: must be > 1");
  if (!(cap > 0.0)) throw UsageError("sweep.C_cap: must be > 0");
  cfg.reject_unused();

  const MeasureTree t = make_measure(ctx, s.ms, s.grid);
  ctx.out.report["measure"] = measure_json(s.ms, t);
  ctx.out.report["params"] = params_json(s.params);
  ctx.out.report["flavor"] = std::string(to_string(s.flavor));
  ctx.use("sigma_measure");
  CellSet all(s.grid);
  all.insert_cube(s.grid.root());
  ctx.out.report["weight"] = {{"spec", w.label()}, {"sigma_root", sigma_measure(w, all)}};
  const LabFields f = fields_for(ctx, t, s.params, s.flavor);
  ctx.use("good_lambda_ratio");
  ctx.use("epsilon_sweep");
  const SweepReport rep = epsilon_sweep(f, w, eps, cap, tau, qs);

  std::ostringstream csv;
  csv << "epsilon,lambda,tau,numerator_sigma,denominator_sigma,numerator_cells,denominator_cells,ratio,theorem_bound,m,skipped\n";
  json rows = json::array();
  for (const auto& r : rep.rows) {
    csv << fmt(r.epsilon) << ',' << fmt(r.lambda) << ',' << fmt(r.tau) << ',' << fmt(r.numerator) << ','
        << fmt(r.denominator) << ',' << r.numerator_cells << ',' << r.denominator_cells << ',' << fmt(r.ratio)
        << ',' << fmt(r.theorem_bound) << ',' << r.m << ',' << (r.skipped ? 1 : 0) << '\n';
    rows.push_back({{"epsilon", r.epsilon}, {"lambda", r.lambda}, {"tau", r.tau}, {"numerator", r.numerator},
                    {"denominator", r.denominator}, {"ratio", r.ratio}, {"theorem_bound", r.theorem_bound},
                    {"m", r.m}, {"skipped", r.skipped}});
  }
  ctx.out.tables.emplace_back("sweep.csv", csv.str());
  ctx.out.report["rows"] = rows;
  ctx.out.report["fit"] = {{"rows", rep.fit_rows}, {"has_fit", rep.has_fit}, {"slope", rep.slope},
                           {"intercept", rep.intercept}, {"fitted_c", rep.fitted_c}, {"fitted_C", rep.fitted_C}};
  ctx.out.report["C_cap"] = rep.C_cap;
  ctx.out.report["fitted_cap"] = rep.fitted_cap;
  if (rep.inconclusive) {
    ctx.verdict("good-lambda capped bound", Verdict::Inconclusive, "every row skipped");
  } else {
    ctx.verdict("good-lambda capped bound", rep.within_cap ? Verdict::Pass : Verdict::Fail,
                "max ratio/bound = " + fmt(rep.fitted_cap) + ", cap = " + fmt(cap));
  }
}

void goodtau_exp(Ctx& ctx) {
  const Config& cfg = ctx.cfg;
  LabSetup s = lab_setup(cfg, {"random-sparse", 2, 8}, 1.0);
  const Weight w = read_weight(cfg, s.grid);
  const auto eps = check_eps(cfg.get_doubles("goodtau.eps", dyadic_eps_grid(6)), "goodtau.eps");
  const auto cp = cfg.get_doubles("goodtau.cprime", default_cprime_grid());
  const auto qs = check_quantiles(cfg.get_doubles("goodtau.quantiles", kDefaultQuantiles));
  for (double c : cp)
    if (c < 0.0) throw UsageError("goodtau.cprime: values must be >= 0");
  cfg.reject_unused();

  const MeasureTree t = make_measure(ctx, s.ms, s.grid);
  ctx.out.report["measure"] = measure_json(s.ms, t);
  ctx.out.report["params"] = params_json(s.params);
  ctx.use("sigma_measure");
  const LabFields f = fields_for(ctx, t, s.params, s.flavor);
  ctx.use("good_tau_check");
  const GoodTauReport rep = good_tau_check(f, w, eps, cp, qs);
  std::ostringstream csv;
  csv << "epsilon,cprime,lambda,ratio\n";
  json per = json::array();
  for (const auto& e : rep.per_eps) {
    per.push_back({{"epsilon", e.epsilon}, {"cprime", e.cprime ? json(*e.cprime) : json(nullptr)},
                   {"skipped_lambdas", e.skipped_lambdas}});
    for (std::size_t l = 0; l < e.lambdas.size(); ++l)
      csv << fmt(e.epsilon) << ',' << (e.cprime ? fmt(*e.cprime) : "") << ',' << fmt(e.lambdas[l]) << ','
          << (e.cprime ? fmt(e.ratios_at_cprime[l]) : "") << '\n';
  }
  ctx.out.tables.emplace_back("goodtau.csv", csv.str());
  ctx.out.report["per_eps"] = per;
  ctx.out.report["max_cprime"] = rep.max_cprime;
  if (rep.inconclusive) ctx.verdict("good-tau c' search", Verdict::Inconclusive, "every level set empty");
  else ctx.verdict("good-tau c' search", rep.all_found ? Verdict::Pass : Verdict::Fail,
                   rep.all_found ? "largest c' = " + fmt(rep.max_cprime) : "no c' in the grid for some eps");
}

void norms_exp(Ctx& ctx) {
  const Config& cfg = ctx.cfg;
  LabSetup s = lab_setup(cfg, {"random-sparse", 2, 8}, 1.0);
  const Weight w = read_weight(cfg, s.grid);
  const auto ps = cfg.get_doubles("norms.p", {0.5, 1.0, 2.0});
  const double scale = cfg.get_double("norms.scale", 2.0);
  for (double p : ps)
    if (!(p > 0.0)) throw UsageError("norms.p: values must be > 0");
  if (!(scale > 0.0)) throw UsageError("norms.scale: must be > 0");
  cfg.reject_unused();

  const MeasureTree t = make_measure(ctx, s.ms, s.grid);
  ctx.out.report["measure"] = measure_json(s.ms, t);
  ctx.out.report["params"] = params_json(s.params);
  const LabFields f = fields_for(ctx, t, s.params, s.flavor);
  const LabFields fs = fields_for(ctx, t.scaled(scale), s.params, s.flavor);
  ctx.use("norm_comparison");
  std::ostringstream csv;
  csv << "p,lhs_norm,rhs_norm,ratio,status,scaled_ratio\n";
  json rows = json::array();
  bool violation = false, all_trivial = true, invariant = true;
  for (double p : ps) {
    const NormComparison a = norm_comparison(f, w, p);
    const NormComparison b = norm_comparison(fs, w, p);
    violation |= a.status == NormStatus::Violation || b.status == NormStatus::Violation;
    all_trivial &= a.status == NormStatus::Trivial;
    if (a.status == NormStatus::Ok && std::fabs(a.ratio - b.ratio) > 1e-12 * a.ratio) invariant = false;
    csv << fmt(p) << ',' << fmt(a.lhs_norm) << ',' << fmt(a.rhs_norm) << ',' << fmt(a.ratio) << ','
        << to_string(a.status) << ',' << fmt(b.ratio) << '\n';
    rows.push_back({{"p", p}, {"lhs_norm", num(a.lhs_norm)}, {"rhs_norm", num(a.rhs_norm)}, {"ratio", num(a.ratio)},
                    {"status", std::string(to_string(a.status))}, {"scaled_ratio", num(b.ratio)}});
  }
  ctx.out.tables.emplace_back("norms.csv", csv.str());
  ctx.out.report["rows"] = rows;
  ctx.out.report["scale"] = scale;
  if (violation) ctx.verdict("norm comparison", Verdict::Fail, "non-finite ratio");
  else if (all_trivial) ctx.verdict("norm comparison", Verdict::Inconclusive, "zero measure");
  else ctx.verdict("norm comparison", Verdict::Pass, "finite ratios");
  if (!all_trivial)
    ctx.verdict("norm ratio scale invariance", invariant ? Verdict::Pass : Verdict::Fail, "mu -> " + fmt(scale) + " mu");
}

void expint_exp(Ctx& ctx) {
  const Config& cfg = ctx.cfg;
  LabSetup s = lab_setup(cfg, {"radial-power", 2, 10}, 1.0);
  const Weight w = read_weight(cfg, s.grid);
  ExpIntegrabilityOptions opt;
  opt.C_target = cfg.get_double("expint.C_target", opt.C_target);
  opt.lambda_points = static_cast<int>(cfg.get_int("expint.lambda_points", opt.lambda_points));
  opt.log_window_lo = cfg.get_double("expint.window_lo", opt.log_window_lo);
  opt.log_window_hi = cfg.get_double("expint.window_hi", opt.log_window_hi);
  opt.c_test_grid = cfg.get_doubles("expint.c_test", {});
  opt.flavor = s.flavor;
  opt.threads = ctx.threads;
  if (opt.lambda_points < 2) throw UsageError("expint.lambda_points: must be >= 2");
  if (!(s.ms.ball.radius > 0.0)) throw UsageError("ball.radius: must be > 0");
  cfg.reject_unused();

  MeasureTree t = make_measure(ctx, s.ms, s.grid);
  if (s.ms.source != "radial-power") {
    CellSet inB(s.grid);
    for (std::uint64_t i = 0; i < s.grid.cell_count(); ++i)
      if (s.ms.ball.contains_center(s.grid.coords_of(i), s.grid.dim())) inB.insert(i);
    t = t.restricted(inB);
  }
  ctx.out.report["measure"] = measure_json(s.ms, t);
  ctx.out.report["params"] = params_json(s.params);
  ctx.out.report["flavor"] = std::string(to_string(s.flavor));
  ctx.use("potential_field");
  ctx.use("exp_integrability_check");
  const ExpIntegrabilityReport r = exp_integrability_check(t, s.params, w, s.ms.ball, opt);
  ctx.out.report["maximal_norm"] = r.maximal_norm;
  if (r.inconclusive) {
    ctx.verdict("exponential integrability", Verdict::Inconclusive, "maximal norm is 0");
    return;
  }
  std::ostringstream h;
  h << "lambda,sigma_T_gt_lambda,sigma_T_gt_2lambda,ratio,bound\n";
  for (const auto& row : r.halving)
    h << fmt(row.lambda) << ',' << fmt(row.sigma_lambda) << ',' << fmt(row.sigma_2lambda) << ',' << fmt(row.ratio)
      << ',' << fmt(row.bound) << '\n';
  ctx.out.tables.emplace_back("expint_halving.csv", h.str());
  std::ostringstream a;
  a << "c_test,average\n";
  for (auto [c, avg] : r.averages) a << fmt(c) << ',' << fmt(avg) << '\n';
  ctx.out.tables.emplace_back("expint_averages.csv", a.str());
  ctx.out.report["normalized_mass_B"] = r.mass_B;
  ctx.out.report["threshold"] = r.threshold;
  ctx.out.report["max_T_outside_2B"] = r.max_T_outside_2B;
  ctx.out.report["fitted_c"] = num(r.fitted_c);
  ctx.out.report["largest_c_test"] = r.largest_c_test;
  ctx.out.report["C_target"] = opt.C_target;
  ctx.out.report["power_fit"] = {{"s", r.power_fit_s}, {"r2", r.power_fit_r2}, {"q", s.params.q}};
  ctx.out.report["log_window"] = {{"cells", r.window_cells}, {"ratio_min", r.window_ratio_min},
                                  {"ratio_max", r.window_ratio_max}};
  if (r.halving.empty())
    ctx.verdict("level-set halving", Verdict::Inconclusive, "no level set above the threshold");
  else
    ctx.verdict("level-set halving", r.halving_holds ? Verdict::Pass : Verdict::Fail, "fitted c = " + fmt(r.fitted_c));
  ctx.verdict("containment in 2B above threshold", r.containment ? Verdict::Pass : Verdict::Fail,
              "max T outside 2B = " + fmt(r.max_T_outside_2B) + ", threshold = " + fmt(r.threshold));
  if (s.ms.source == "radial-power" && r.window_cells > 0)
    ctx.verdict("T / log(1/|x|) window", r.window_ok ? Verdict::Pass : Verdict::Fail,
                "[" + fmt(r.window_ratio_min) + ", " + fmt(r.window_ratio_max) + "]");
  ctx.info("power-law fit of the level-set tail: s = " + fmt(r.power_fit_s) + " (q = " + fmt(s.params.q) + ")");
}

void sharpness_exp(Ctx& ctx) {
  const Config& cfg = ctx.cfg;
  const double eps = cfg.get_double("sharpness.epsilon", 0.5);
  const int n = static_cast<int>(cfg.get_int("sharpness.n", 1));
  const double alpha = cfg.get_double("sharpness.alpha", 0.5);
  const bool direct = cfg.get_bool("sharpness.direct", true);
  const auto fit_eps = cfg.get_doubles("sharpness.fit_eps", {});
  const auto heldout = cfg.get_optional("sharpness.heldout");
  std::optional<double> held;
  if (heldout) held = parse_double(*heldout);
  if (!(eps > 0.0 && eps <= 1.0)) throw UsageError("sharpness.epsilon: must lie in (0, 1]");
  if (n < 1 || n > kMaxDim) throw UsageError("sharpness.n: must be 1, 2 or 3");
  if (!(alpha > 0.0 && alpha < n)) throw UsageError("sharpness.alpha: must satisfy 0 < alpha < n");
  for (double e : fit_eps)
    if (!(e > 0.0 && e <= 1.0)) throw UsageError("sharpness.fit_eps: values must lie in (0, 1]");
  if (fit_eps.size() == 1) throw UsageError("sharpness.fit_eps: needs at least two values");
  if (held && !(*held > 0.0 && *held <= 1.0)) throw UsageError("sharpness.heldout: must lie in (0, 1]");
  cfg.reject_unused();

  ctx.use("build_sharp_example");
  const SharpExample ex = build_sharp_example(eps, n, alpha);
  ctx.use("sharpness_report");
  const SharpnessReport r = sharpness_report(ex, ctx.threads);
  ctx.info("sharp example: eps = " + fmt(eps) + ", delta = " + fmt(ex.delta) + ", N = " + std::to_string(ex.N));
  ctx.out.report["example"] = {{"epsilon", eps}, {"n", n}, {"alpha", alpha}, {"delta", ex.delta}, {"N", ex.N},
                               {"representation", ex.dense() ? "dense" : "annulus-implicit"}};

  ctx.use("eval_A_closed");
  std::ostringstream an;
  an << "k,cells,density,A_closed,A_direct\n";
  double worst = 0.0;
  const bool do_direct = direct && ex.dense();
  if (do_direct) {
    ctx.use("eval_A_direct");
    ctx.use("common_ancestor_level");
  }
  for (int k = 0; k <= ex.N; ++k) {
    Coords rep{};
    if (k > 0) rep[0] = std::uint64_t{1} << (k - 1);
    const double closed = ex.dense() ? eval_A_closed(ex, rep) : eval_A_closed_annulus(ex, k);
    an << k << ',' << fmt(ex.annulus_cells(k)) << ',' << fmt(ex.annulus_density(k)) << ',' << fmt(closed) << ',';
    if (do_direct) {
      const double d = eval_A_direct(ex, rep);
      worst = std::max(worst, std::fabs(d - closed) / closed);
      an << fmt(d);
    }
    an << '\n';
  }
  ctx.out.tables.emplace_back("sharpness_annuli.csv", an.str());

  ctx.out.report["A_Q0"] = r.A_Q0;
  ctx.out.report["dyadic_maximal_Q0"] = r.dyadic_maximal_Q0;
  ctx.out.report["ball_maximal_Q0"] = num(r.ball_maximal_Q0);
  ctx.out.report["k0"] = r.k0;
  ctx.out.report["k0_times_eps"] = r.k0 * eps;
  ctx.out.report["good_cells"] = r.good_cells;
  ctx.out.report["level_cells"] = r.level_cells;
  ctx.out.report["ratio"] = r.ratio;
  ctx.out.report["implied_lower"] = r.implied_lower;
  ctx.out.report["comparability"] = {{"min", r.comparability_min}, {"max", r.comparability_max}};

  ctx.verdict("A on Q^0 equals delta (N + 1)", r.q0_exact ? Verdict::Pass : Verdict::Fail);
  if (do_direct)
    ctx.verdict("closed form vs direct sum", worst <= 1e-9 ? Verdict::Pass : Verdict::Fail,
                "max relative error " + fmt(worst) + " over annulus representatives");
  ctx.verdict("(a) dyadic maximal on Q^0 <= eps", r.a_dyadic ? Verdict::Pass : Verdict::Fail,
              fmt(r.dyadic_maximal_Q0));
  ctx.info("ball maximal on Q^0 = " + fmt(r.ball_maximal_Q0) + (r.a_ball ? " (<= eps)" : " (above eps)"));
  ctx.verdict("(b) Q^0 in {A > 2, M <= eps}", r.b_containment ? Verdict::Pass : Verdict::Fail);
  ctx.verdict("(c) {A > 1} in Q^k0", r.c_containment ? Verdict::Pass : Verdict::Fail, "k0 = " + std::to_string(r.k0));
  ctx.info("k0 = " + std::to_string(r.k0) + ", 4/eps = " + fmt(r.k0_bound) + (r.k0_within_bound ? " (within)" : " (above)"));
  ctx.verdict("(d) ratio >= 2^{-n k0}", r.d_ratio ? Verdict::Pass : Verdict::Fail,
              "ratio = " + fmt(r.ratio) + ", bound = " + fmt(r.implied_lower));

  std::ostringstream rt;
  rt << "epsilon,N,k0,k0_bound,good_cells,level_cells,ratio,implied_lower,fit_bound\n";
  std::vector<std::pair<double, double>> pts;
  std::vector<SharpnessReport> reports;
  for (double e : fit_eps) {
    const SharpnessReport x = sharpness_report(build_sharp_example(e, n, alpha), ctx.threads);
    pts.emplace_back(e, x.ratio);
    reports.push_back(x);
  }
  std::optional<SharpnessReport> held_rep;
  if (held && !fit_eps.empty()) held_rep = sharpness_report(build_sharp_example(*held, n, alpha), ctx.threads);
  std::optional<DecayFit> fit;
  if (pts.size() >= 2) {
    bool positive = true;
    for (auto [e, ratio] : pts) positive &= ratio > 0.0;
    if (positive)
      fit = fit_sharpness_decay(pts, held_rep ? std::optional(std::pair{*held, held_rep->ratio}) : std::nullopt);
  }
  auto row = [&](const SharpnessReport& x) {
    rt << fmt(x.epsilon) << ',' << x.N << ',' << x.k0 << ',' << fmt(x.k0_bound) << ',' << fmt(x.good_cells) << ','
       << fmt(x.level_cells) << ',' << fmt(x.ratio) << ',' << fmt(x.implied_lower) << ','
       << (fit ? fmt(fit->c1 * std::exp(-fit->c2 / x.epsilon)) : "") << '\n';
  };
  row(r);
  for (const auto& x : reports) row(x);
  if (held_rep) row(*held_rep);
  ctx.out.tables.emplace_back("sharpness_ratio.csv", rt.str());
  if (fit) {
    ctx.out.report["decay_fit"] = {{"c1", fit->c1}, {"c2", fit->c2}, {"holds_on_fit", fit->holds_on_fit}};
    ctx.verdict("ratio >= c1 exp(-c2/eps) on the fit set", fit->holds_on_fit ? Verdict::Pass : Verdict::Fail,
                "c1 = " + fmt(fit->c1) + ", c2 = " + fmt(fit->c2));
    if (fit->heldout) {
      ctx.out.report["decay_fit"]["heldout"] = {{"epsilon", fit->heldout->first}, {"ratio", fit->heldout->second},
                                                {"bound", fit->heldout_bound}};
      ctx.verdict("decay fit on held-out eps", fit->holds_heldout ? Verdict::Pass : Verdict::Fail,
                  "ratio = " + fmt(fit->heldout->second) + ", bound = " + fmt(fit->heldout_bound));
    }
  }
}

void whitney_exp(Ctx& ctx) {
  const Config& cfg = ctx.cfg;
  const MeasureSpec ms = read_measure_spec(cfg, {"random-sparse", 2, 6});
  const Grid g = measure_grid(ms);
  if (!g.dense_ok()) throw UsageError("whitney: grid too large for cell sets");
  const PotentialParams p = read_params(cfg, g, 1.0, 1.0, true);
  const std::string set = cfg.get_string("whitney.set", "levelset");
  const double quantile = cfg.get_double("whitney.quantile", 0.75);
  const double fill = cfg.get_double("whitney.fill", 0.35);
  if (set != "levelset" && set != "random") throw UsageError("whitney.set: levelset | random");
  if (!(quantile >= 0.0 && quantile <= 1.0)) throw UsageError("whitney.quantile: must lie in [0, 1]");
  if (!(fill >= 0.0 && fill <= 1.0)) throw UsageError("whitney.fill: must lie in [0, 1]");
  cfg.reject_unused();

  CellSet G(g);
  if (set == "levelset") {
    const MeasureTree t = make_measure(ctx, ms, g);
    ctx.out.report["measure"] = measure_json(ms, t);
    ctx.use("potential_field");
    const Field f = potential_field(t, p, Operator::DyadicPotential, ctx.threads);
    const auto qv = positive_quantiles(f.values, {quantile});
    const double lambda = qv.empty() ? 0.0 : qv[0];
    for (std::uint64_t i = 0; i < f.values.size(); ++i)
      if (f.values[i] > lambda) G.insert(i);
    ctx.out.report["lambda"] = lambda;
  } else {
    Rng rng(ctx.seed);
    for (std::uint64_t i = 0; i < g.cell_count(); ++i)
      if (rng.uniform() < fill) G.insert(i);
  }
  ctx.out.report["set_cells"] = G.count();
  ctx.use("dyadic_maximal_decomposition");
  ctx.use("whitney_decomposition");
  ctx.use("verify_decomposition");
  json reps;
  for (const auto& d : {dyadic_maximal_decomposition(G), whitney_decomposition(G)}) {
    const DecompositionReport v = verify_decomposition(d);
    const std::string name(to_string(d.flavor));
    std::ostringstream csv;
    write_decomposition_csv(csv, d);
    ctx.out.tables.emplace_back("whitney_" + name + ".csv", csv.str());
    reps[name] = {{"cubes", d.cubes.size()}, {"tiles_exactly", v.tiles_exactly}, {"disjoint", v.disjoint},
                  {"covered_cells", v.covered_cells}, {"max_overlap_of_doubles", v.max_overlap_of_doubles},
                  {"overlap_bound", v.overlap_bound}, {"parent_maximality", v.parent_maximality},
                  {"ratio_cubes", v.ratio_cubes}, {"dist_ratio_min", v.dist_ratio_min},
                  {"dist_ratio_max", v.dist_ratio_max}, {"unit_cells", v.unit_cells}};
    ctx.verdict(name + " tiles exactly", v.tiles_exactly ? Verdict::Pass : Verdict::Fail);
    if (d.flavor == DecompositionFlavor::DyadicMaximal)
      ctx.verdict(name + " parent maximality", v.parent_maximality ? Verdict::Pass : Verdict::Fail);
    else {
      ctx.verdict(name + " overlap of doubles <= 4^n",
                  v.max_overlap_of_doubles <= v.overlap_bound ? Verdict::Pass : Verdict::Fail,
                  std::to_string(v.max_overlap_of_doubles));
      if (v.ratio_cubes > 0)
        ctx.info(name + " dist/diam over level >= 1 cubes: [" + fmt(v.dist_ratio_min) + ", " +
                 fmt(v.dist_ratio_max) + "], unit cells: " + std::to_string(v.unit_cells));
    }
  }
  ctx.out.report["decompositions"] = reps;
}

void ainfty_exp(Ctx& ctx) {
  const Config& cfg = ctx.cfg;
  const int n = static_cast<int>(cfg.get_int("ainfty.n", 2));
  const int J = static_cast<int>(cfg.get_int("ainfty.J", 6));
  const std::uint64_t samples = cfg.get_u64("ainfty.samples", 10000);
  Grid g;
  try {
    g = Grid(n, J);
    g.require_dense("ainfty-check");
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (samples == 0) throw UsageError("ainfty.samples: must be >= 1");
  const Weight w = read_weight(cfg, g);
  cfg.reject_unused();

  ctx.use("sigma_measure");
  CellSet all(g);
  all.insert_cube(g.root());
  ctx.use("check_weak_ainfty");
  const AinftyReport r = check_weak_ainfty(w, samples, ctx.seed, ctx.threads);
  ctx.out.report["weight"] = {{"spec", w.label()}, {"sigma_root", sigma_measure(w, all)}};
  ctx.out.report["samples"] = r.samples;
  ctx.out.report["violations"] = r.violations;
  ctx.out.report["clipped_samples"] = r.clipped_samples;
  ctx.out.report["max_ratio"] = num(r.max_ratio);
  ctx.out.report["fitted"] = {{"theta", r.theta_hat}, {"C", num(r.C_hat)}, {"C_reference", r.C_reference}};
  std::ostringstream csv;
  csv << "level";
  for (int a = 0; a < n; ++a) csv << ",c" << a;
  csv << ",e_cells,e_sigma,double_sigma,volume_ratio,ratio,bound\n";
  json wit = json::array();
  for (const auto& x : r.witnesses) {
    csv << x.cube.level;
    for (int a = 0; a < n; ++a) csv << ',' << x.cube.coords[a];
    csv << ',' << x.cells.size() << ',' << fmt(x.e_sigma) << ',' << fmt(x.double_sigma) << ',' << fmt(x.volume_ratio)
        << ',' << fmt(x.ratio) << ',' << fmt(x.bound) << '\n';
    wit.push_back({{"cube", cube_json(x.cube, n)}, {"E", x.cells}, {"ratio", num(x.ratio)}, {"bound", x.bound}});
  }
  ctx.out.tables.emplace_back("ainfty_witnesses.csv", csv.str());
  ctx.out.report["witnesses"] = wit;
  if (!r.claim) {
    ctx.verdict("weak A-infinity claim", Verdict::Inconclusive, "no claim configured");
  } else {
    ctx.out.report["claim"] = {{"theta", r.claim->theta}, {"C", r.claim->C}};
    ctx.verdict("weak A-infinity claim", r.violations == 0 ? Verdict::Pass : Verdict::Fail,
                r.violations == 0 ? "not falsified" : "falsified, " + std::to_string(r.violations) + " violations");
  }
}

}  // namespace

RunResult run_experiment(const std::string& kind, const Config& cfg, const RunOptions& opt) {
  static const std::map<std::string, std::function<void(Ctx&)>> table{
      {"potential-field", potential_field_exp}, {"goodlambda-sweep", goodlambda_exp},
      {"goodtau", goodtau_exp},                 {"norms", norms_exp},
      {"expint", expint_exp},                   {"sharpness", sharpness_exp},
      {"whitney", whitney_exp},                 {"ainfty-check", ainfty_exp}};
  auto it = table.find(kind);
  if (it == table.end()) throw UsageError("unknown experiment kind '" + kind + "'");
  const auto cfg_kind = cfg.get_optional("kind");
  if (cfg_kind && *cfg_kind != kind)
    throw UsageError("config kind '" + *cfg_kind + "' does not match subcommand '" + kind + "'");
  RunResult res;
  res.kind = kind;
  const std::uint64_t seed = opt.seed ? *opt.seed : cfg.get_u64("seed", 1);
  if (opt.seed) cfg.get_optional("seed");
  const long long threads = opt.threads ? *opt.threads : cfg.get_int("threads", 1);
  if (opt.threads) cfg.get_optional("threads");
  if (threads < 1) throw UsageError("threads: must be >= 1");
  res.report["kind"] = kind;
  res.report["seed"] = seed;
  Ctx ctx{cfg, res, seed, static_cast<int>(threads)};
  it->second(ctx);
  res.report["overall"] = to_string(res.overall);
  res.report["operations"] = res.operations;
  return res;
}

void write_outputs(const RunResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory '" + out_dir + "': " + ec.message());
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
    if (!f) throw Error("cannot write '" + (fs::path(out_dir) / name).string() + "'");
    f << text;
  };
  write("report.json", result.report.dump(2) + "\n");
  for (const auto& [name, text] : result.tables) write(name, text);
}

int run_config(const std::string& path, const RunOptions& opt, std::ostream& out, std::ostream& err) {
  RunResult res;
  try {
    const Config cfg = Config::parse_file(path);
    const auto kind = cfg.get_optional("kind");
    if (!kind) throw UsageError(path + ": missing 'kind'");
    res = run_experiment(*kind, cfg, opt);
    res.operations.insert("run_config");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  try {
    write_outputs(res, opt.out_dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  for (const auto& line : res.lines) out << line << '\n';
  return res.exit_code();
}

}  // namespace dyadlab::cli
