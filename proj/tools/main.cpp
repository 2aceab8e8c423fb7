#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "config.hpp"
#include "dyadlab/grid.hpp"
#include "experiments.hpp"

using namespace dyadlab::cli;

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";
  int threads = 1;
  std::vector<std::string> set;
};

void add_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "config file (key = value, [section] headers)");
  app->add_option("--seed", f.seed, "RNG seed, overrides the config");
  app->add_option("--out", f.out, "output directory")->capture_default_str();
  app->add_option("--threads", f.threads, "worker threads, overrides the config")->check(CLI::PositiveNumber);
  app->add_option("--set", f.set, "override one config entry, section.key=value (repeatable)");
}

RunOptions options(const CLI::App* app, const Flags& f) {
  RunOptions o;
  o.out_dir = f.out;
  if (app->count("--seed")) o.seed = f.seed;
  if (app->count("--threads")) o.threads = f.threads;
  return o;
}

Config load(const Flags& f) {
  Config cfg;
  if (!f.config.empty()) cfg = Config::parse_file(f.config);
  for (const auto& s : f.set) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1), "--set " + s.substr(0, eq));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dyadlab: dyadic potentials, maximal functions and good-lambda experiments"};
  app.require_subcommand(1);

  Flags flags;
  std::string selected;
  for (const auto& kind : experiment_kinds()) {
    CLI::App* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
    add_flags(sub, flags);
    sub->callback([&selected, kind] { selected = kind; });
  }
  CLI::App* run = app.add_subcommand("run", "run the experiment named by the config's kind key");
  add_flags(run, flags);
  run->callback([&selected] { selected = "run"; });
  run->get_option("--config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const RunOptions opt = options(sub, flags);
  RunResult res;
  try {
    const Config cfg = load(flags);
    std::string kind = selected;
    if (kind == "run") {
      const auto k = cfg.get_optional("kind");
      if (!k) throw UsageError(flags.config + ": missing 'kind'");
      kind = *k;
    }
    res = run_experiment(kind, cfg, opt);
    if (selected == "run") res.operations.insert("run_config");
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  try {
    write_outputs(res, opt.out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  for (const auto& line : res.lines) std::cout << line << '\n';
  std::cout << "OVERALL: " << to_string(res.overall) << '\n';
  return res.exit_code();
}
