#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "config.hpp"
#include "experiments.hpp"

using namespace dyadlab::cli;
namespace fs = std::filesystem;

namespace {

Config cfg_of(const std::string& text) {
  std::istringstream in(text);
  return Config::parse(in, "test");
}

// Small settings per kind so the whole set runs in a few seconds.
const std::map<std::string, std::string>& tiny() {
  static const std::map<std::string, std::string> m{
      {"potential-field", "[measure]\nn = 2\nJ = 4\n[field]\nshell_level = 1\n"},
      {"goodlambda-sweep", "[measure]\nn = 2\nJ = 5\n[sweep]\neps = 0.5,0.25,0.125\n"},
      {"goodtau", "[measure]\nn = 2\nJ = 5\n[goodtau]\neps = 0.5,0.25\n"},
      {"norms", "[measure]\nn = 2\nJ = 5\n[weight]\nspec = power gamma=1 center=3,3\n"},
      {"expint", "[measure]\nn = 2\nJ = 7\n"},
      {"sharpness", "[sharpness]\nepsilon = 0.7\nn = 1\nalpha = 0.5\n"},
      {"whitney", "[measure]\nn = 2\nJ = 5\n"},
      {"ainfty-check", "[ainfty]\nJ = 4\nsamples = 300\n[weight]\nclaim_theta = 1\nclaim_C = 1\n"},
  };
  return m;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dyadlab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DYADLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing") {
  const Config c = cfg_of("kind = norms\n# comment\n[measure]\nn = 2\nJ=5\n\n[norms]\np = 0.5, 1,2\n");
  CHECK(c.get_string("kind", "") == "norms");
  CHECK(c.get_int("measure.n", 0) == 2);
  CHECK(c.get_int("measure.J", 0) == 5);
  CHECK(c.get_doubles("norms.p", {}) == std::vector<double>{0.5, 1.0, 2.0});
  CHECK(c.get_double("absent", 7.5) == 7.5);
  c.reject_unused();

  CHECK_THROWS_AS(cfg_of("a = 1\na = 2\n"), UsageError);
  CHECK_THROWS_AS(cfg_of("[broken\n"), UsageError);
  CHECK_THROWS_AS(cfg_of("no equals sign\n"), UsageError);
  try {
    cfg_of("x = 1\ny = oops\n").get_double("y", 0.0);
    FAIL("expected a usage error");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("test:2") != std::string::npos);
  }
  const Config u = cfg_of("[measure]\nnn = 2\n");
  CHECK_THROWS_AS(u.reject_unused(), UsageError);
  // full precision decimal parsing
  CHECK(cfg_of("v = 0.1\n").get_double("v", 0.0) == 0.1);
}

TEST_CASE("precondition violations are rejected before computation") {
  const RunOptions opt;
  CHECK_THROWS_AS(run_experiment("norms", cfg_of("[params]\nalpha = 2\n"), opt), UsageError);
  CHECK_THROWS_AS(run_experiment("norms", cfg_of("[params]\nq = -1\n"), opt), UsageError);
  CHECK_THROWS_AS(run_experiment("sharpness", cfg_of("[sharpness]\nalpha = 1\n"), opt), UsageError);
  CHECK_THROWS_AS(run_experiment("goodlambda-sweep", cfg_of("[sweep]\neps = 0.5,1.5\n"), opt), UsageError);
  CHECK_THROWS_AS(run_experiment("potential-field", cfg_of("[measure]\nsource = file\npath = /no/such/file\n"), opt),
                  UsageError);
  CHECK_THROWS_AS(run_experiment("potential-field", cfg_of("[measure]\nbogus = 1\n"), opt), UsageError);
  CHECK_THROWS_AS(run_experiment("norms", cfg_of("kind = whitney\n"), opt), UsageError);
  CHECK_THROWS_AS(run_experiment("nope", cfg_of(""), opt), UsageError);
}

TEST_CASE("every module operation is reachable from some kind") {
  std::set<std::string> seen;
  const fs::path dir = scratch("coverage");
  for (const auto& kind : experiment_kinds()) {
    std::ofstream(dir / (kind + ".cfg")) << "kind = " << kind << "\n" << tiny().at(kind);
    RunOptions opt;
    opt.out_dir = (dir / kind).string();
    std::ostringstream out, err;
    const int code = run_config((dir / (kind + ".cfg")).string(), opt, out, err);
    CHECK_MESSAGE(code != 3, kind, ": ", err.str());
    const RunResult r = run_experiment(kind, cfg_of(tiny().at(kind)), opt);
    for (const auto& op : operations_for(kind)) CHECK_MESSAGE(r.operations.count(op), kind, " missed ", op);
    seen.insert(r.operations.begin(), r.operations.end());
    CHECK(fs::exists(dir / kind / "report.json"));
  }
  seen.insert("run_config");  // exercised above
  // the file measure path
  {
    std::ofstream(dir / "m.txt") << "n=1 J=3\n2 0.5\n";
    const RunResult r =
        run_experiment("potential-field", cfg_of("[params]\nalpha = 0.5\n[measure]\nsource = file\npath = " + (dir / "m.txt").string()), {});
    CHECK(r.operations.count("build_measure"));
  }
  for (const auto& op : module_operations()) CHECK_MESSAGE(seen.count(op), "unreached: ", op);
  fs::remove_all(dir);
}

TEST_CASE("re-runs are bit identical and thread independent") {
  for (const auto& kind : experiment_kinds()) {
    RunOptions a, b;
    a.seed = b.seed = 77;
    a.threads = 1;
    b.threads = 3;
    const RunResult x = run_experiment(kind, cfg_of(tiny().at(kind)), a);
    const RunResult y = run_experiment(kind, cfg_of(tiny().at(kind)), a);
    const RunResult z = run_experiment(kind, cfg_of(tiny().at(kind)), b);
    CHECK_MESSAGE(x.report.dump() == y.report.dump(), kind);
    CHECK_MESSAGE(x.tables == y.tables, kind);
    CHECK_MESSAGE(x.report.dump() == z.report.dump(), kind);
    CHECK_MESSAGE(x.tables == z.tables, kind);
  }
}

TEST_CASE("verdicts for the documented configs") {
  const RunResult s = run_experiment("sharpness", cfg_of("[sharpness]\nepsilon = 0.5\nn = 1\nalpha = 0.5\n"), {});
  CHECK(s.overall == Verdict::Pass);
  bool csv = false;
  for (const auto& [name, text] : s.tables) csv |= name == "sharpness_annuli.csv" && !text.empty();
  CHECK(csv);

  const RunResult z = run_experiment("goodlambda-sweep", cfg_of("[measure]\nsource = zero\nJ = 4\n"), {});
  CHECK(z.overall == Verdict::Inconclusive);
  CHECK(z.exit_code() == 2);

  const RunResult f = run_experiment(
      "ainfty-check", cfg_of("[ainfty]\nJ = 5\nsamples = 2000\n[weight]\nspec = cell 3,4\nclaim_theta = 1\nclaim_C = 1\n"),
      {});
  CHECK(f.overall == Verdict::Fail);
  CHECK(f.exit_code() == 1);
  CHECK_FALSE(f.report["witnesses"].empty());

  const RunResult none = run_experiment("ainfty-check", cfg_of("[ainfty]\nJ = 4\nsamples = 100\n"), {});
  CHECK(none.overall == Verdict::Inconclusive);
}

TEST_CASE("binary: flags, outputs and exit codes") {
  const fs::path dir = scratch("binary");
  std::ofstream(dir / "sharp.cfg") << "kind = sharpness\n[sharpness]\nepsilon = 0.5\nn = 1\nalpha = 0.5\n";
  std::ofstream(dir / "bad.cfg") << "kind = norms\n[params]\nalpha = 3\n";
  std::ofstream(dir / "zero.cfg") << "kind = goodlambda-sweep\n[measure]\nsource = zero\nJ = 4\n";

  CHECK(run_cli("sharpness --config " + (dir / "sharp.cfg").string() + " --out " + (dir / "s").string()) == 0);
  CHECK(fs::exists(dir / "s" / "report.json"));
  CHECK(fs::exists(dir / "s" / "sharpness_annuli.csv"));
  CHECK(run_cli("run --config " + (dir / "sharp.cfg").string() + " --out " + (dir / "r").string()) == 0);
  CHECK(slurp(dir / "s" / "sharpness_annuli.csv") == slurp(dir / "r" / "sharpness_annuli.csv"));

  CHECK(run_cli("norms --config " + (dir / "bad.cfg").string() + " --out " + (dir / "b").string()) == 3);
  CHECK_FALSE(fs::exists(dir / "b"));
  CHECK(run_cli("run --config " + (dir / "zero.cfg").string() + " --out " + (dir / "z").string()) == 2);
  CHECK(run_cli("norms --config " + (dir / "sharp.cfg").string() + " --out " + (dir / "m").string()) == 3);
  CHECK(run_cli("frobnicate") == 3);
  CHECK(run_cli("norms --threads 0") == 3);
  CHECK(run_cli("ainfty-check --set ainfty.J=4 --set ainfty.samples=500 --set weight.spec=cell\\ 1,1"
                " --set weight.claim_theta=1 --set weight.claim_C=1 --out " +
                (dir / "a").string()) == 1);
  CHECK(run_cli("potential-field --seed 5 --set measure.J=4 --out " + (dir / "p1").string()) == 0);
  CHECK(run_cli("potential-field --seed 5 --set measure.J=4 --threads 2 --out " + (dir / "p2").string()) == 0);
  CHECK(slurp(dir / "p1" / "report.json") == slurp(dir / "p2" / "report.json"));
  fs::remove_all(dir);
}

}
