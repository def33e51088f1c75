#pragma once

#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "homog/microstructure.hpp"
#include "homog/schemes.hpp"

namespace homog {

using Json = nlohmann::ordered_json;

/// Config-file problem; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Exit-code contract of the batch front end.
enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kSolverError = 3,
  kFixedPointError = 4,
};

struct RunTolerances {
  double fixed_point_tol = 1e-6;
  double bisection_tol = 1e-8;
  double a1_coord_tol_factor = 1e-6;
};

struct RunConfig {
  int format_version = 1;
  GeneratorSpec generator;
  SolverConfig solver;
  std::set<std::string> schemes;  // subset of the names below
  RunTolerances tolerances;
  std::string output;             // report path; empty = stdout only
  std::string csv_output;         // optional fixed-point trace CSV
};

inline const std::set<std::string> kKnownSchemes = {
    "A1", "A2", "A3", "A4", "periodic_reference", "eshelby_validate", "concavity_report"};

/// Parses and validates a config document; throws ConfigError with the
/// field path on any problem.
RunConfig parse_run_config(const Json& doc);
RunConfig load_run_config(const std::string& path);

/// FNV-1a hash of the canonical config serialization, embedded in reports.
std::string config_hash(const RunConfig& cfg);
Json config_to_json(const RunConfig& cfg);

/// Runs generate -> solve -> schemes and assembles the report. Timing data
/// lives only under "timings" so payloads are byte-identical across runs of
/// the same config.
Json run_homogenize(const RunConfig& cfg);

/// Full pipeline with file output; returns an ExitCode and writes
/// diagnostics to `diag` on failure.
int cmd_homogenize(const std::string& config_path, std::ostream& out, std::ostream& diag);

struct EshelbyCliArgs {
  IsoModuli inclusion{1.0, 0.5};
  IsoModuli matrix{1.0, 0.5};
  std::string sigma = "12";  // "id" or digit pair "kl"
  bool json = false;
};

/// Closed-form Eshelby report: interior matrix, the three energy routes and
/// the traction-jump residual.
int cmd_eshelby(const EshelbyCliArgs& args, std::ostream& out);

/// Per-N self-consistent sweep; optional CSV of (N, kappa4, mu4, outer iterations).
Json run_sweep(const RunConfig& cfg, const std::vector<int>& rescale_factors);

void write_trace_csv(const FixedPointTrace& trace, const std::string& path);

}  // namespace homog
