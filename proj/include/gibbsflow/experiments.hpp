#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "gibbsflow/config.hpp"

namespace gf {

struct RunOutcome {
  json summary;                             // written as <experiment>.json
  std::vector<std::string> files;           // relative to the output directory
  std::vector<std::string> flags;           // e.g. "no_contraction: constant_roof_detected"
  std::vector<std::string> audit_failures;  // asserted inequalities that failed numerically
  bool audit_ok() const { return audit_failures.empty(); }
};

// Runs one experiment and writes its CSV/JSON outputs into c.out_dir.
RunOutcome run_experiment(const ExperimentConfig& c);

// run_experiment plus manifest.json; returns the exit code (0 ok, 2 audit
// failure). Errors propagate as exceptions.
int run(const ExperimentConfig& c, std::ostream& log);

}  // namespace gf
