#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kpzlab/config.hpp"
#include "kpzlab/observe.hpp"

namespace kpzlab {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Report {
  std::string experiment;
  int criterion = 0;
  std::string title;
  std::vector<Check> checks;
  std::vector<std::string> notes;  // diagnostics that do not gate the verdict
  json data = json::object();
  double seconds = 0.0;

  bool pass() const;
  json to_json() const;
};

struct RunOptions {
  std::ostream* log = nullptr;  // progress lines
};

// Names accepted in a config's "experiment" field.
std::vector<std::string> experiment_names();
Report run_experiment(const RunConfig& config, const RunOptions& opts = {});

// Probe records of independent replicas of the model/measure/engine/analysis blocks, in replica
// order. Analysis takes "test_functions" (list), "frame" ("still" | "floor" | "fractional") and
// optional "currents" (list of sites).
struct Simulation {
  std::vector<ProbeRecord> records;
  std::uint64_t events = 0;
};
Simulation simulate(const RunConfig& config);

// Per (probe id, time): count, mean, variance, standard error, skewness.
struct ProbeSummary {
  std::string probe_id;
  double t = 0.0;
  std::size_t count = 0;
  double mean = 0.0, variance = 0.0, se = 0.0, skewness = 0.0;
};
std::vector<ProbeSummary> summarize_probes(const std::vector<ProbeRecord>& records);

}  // namespace kpzlab
