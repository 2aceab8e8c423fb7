#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "config.hpp"

namespace dyadlab::cli {

enum class Verdict { Pass, Fail, Inconclusive };

const char* to_string(Verdict v);

struct RunOptions {
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

struct RunResult {
  std::string kind;
  nlohmann::ordered_json report;
  std::vector<std::pair<std::string, std::string>> tables;  // file name, CSV text
  std::vector<std::string> lines;                           // stdout, verdicts included
  std::set<std::string> operations;                         // module operations exercised
  Verdict overall = Verdict::Pass;

  /// 0 pass, 1 failure, 2 inconclusive.
  int exit_code() const;
};

const std::vector<std::string>& experiment_kinds();

/// Every library operation the runner is expected to reach.
const std::vector<std::string>& module_operations();

/// Operations a kind exercises on its default configuration.
const std::vector<std::string>& operations_for(const std::string& kind);

/// Reads every setting first (unknown keys and precondition violations raise
/// UsageError before any computation), then runs.
RunResult run_experiment(const std::string& kind, const Config& cfg, const RunOptions& opt);

/// The only place that touches the output directory: report.json plus one
/// file per table.
void write_outputs(const RunResult& result, const std::string& out_dir);

/// Parses `path`, runs the kind named by its `kind` key, writes outputs and
/// prints the lines. Returns the exit status (3 on usage errors).
int run_config(const std::string& path, const RunOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace dyadlab::cli
