#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace homog {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  /// Analytic-only criteria (no FEM solves); finishes in seconds.
  bool quick = false;
};

/// Runs the validation suite and returns one result per criterion, in id
/// order. FEM-heavy criteria are marked skipped in quick mode.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts = {});

/// Pass/fail table (or JSON) to the stream; returns the process exit code
/// (0 iff nothing failed).
int report_acceptance(const std::vector<CriterionResult>& results, bool json, std::ostream& os);

}  // namespace homog
