#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "homog/embedded_fem.hpp"
#include "homog/tensor.hpp"

namespace homog {

/// Evaluator of the embedded-corrector energy E_sigma(A) for a fixed
/// interior field, with a backend tag and a thread-safe memo cache keyed on
/// the exact (A, sigma) bytes. Closed-form backends must agree with the
/// eshelby module; FEM backends carry their solver state and warm-start
/// caches internally.
class EnergyOracle {
 public:
  enum class Backend { closed_form_eshelby, fem };

  EnergyOracle(Backend backend, std::function<double(const ElasticTensor&, const SymMat&)> fn);

  double operator()(const ElasticTensor& exterior, const SymMat& sigma) const;
  Backend backend() const { return backend_; }

 private:
  struct Cache;
  Backend backend_;
  std::function<double(const ElasticTensor&, const SymMat&)> fn_;
  std::shared_ptr<Cache> cache_;
};

/// Closed-form oracle for a constant isotropic interior field. The exterior
/// tensor must be isotropic.
EnergyOracle make_eshelby_oracle(const IsoModuli& inclusion);

/// FEM-backed oracle over an arbitrary voxel field. Consecutive queries for
/// the same sigma warm-start from the previous solution, which makes the
/// root-finding sweeps cheap. Solves are audited (see SolveAudit).
EnergyOracle make_fem_oracle(const VoxelField& field, const SolverConfig& cfg);

/// Per-solve record of the primal/flux energy agreement and the discrete
/// Korn quantities, for the duality and invariant checks across a run.
struct SolveAudit {
  double energy_primal;
  double energy_flux;
  double cg_tol;
  double scale;  // mean load energy (1/|B_h|) integral_B sigma.A sigma
  int iterations;
  KornReport korn;
};
const std::vector<SolveAudit>& solve_audit_log();
void clear_solve_audit_log();
void append_solve_audit(const SolveAudit& audit);

/// E(A) = sum over 1<=i<=j<=3 of E_{sigma^ij}(A); six oracle calls.
double total_energy(const EnergyOracle& oracle, const ElasticTensor& A);

struct Approx1Options {
  double coord_tol_factor = 1e-6;  // coordinate tolerance = factor * beta
  int max_alternations = 60;
  double concavity_slack = 1e-9;   // relative slack of the bracket check
};

/// Maximizer of (kappa, mu) -> total_energy(iso(kappa, mu)) over
/// [alpha, beta] x [alpha/2, beta/2], by alternating 1-D concave bracket
/// searches. A detected unimodality violation raises an error naming the
/// offending slice.
IsoModuli approx1_iso(const EnergyOracle& oracle, const EllipticityBand& band,
                      const Approx1Options& opts = {});

struct Approx2Result {
  ElasticTensor tensor;
  double asymmetry_rel;  // ||M - M^T|| / ||M|| before symmetrization
};

/// Flux-average tensor, column by column from the six embedded solves with
/// exterior A1.
Approx2Result approx2(const VoxelField& field, const ElasticTensor& A1, const SolverConfig& cfg);

/// Unique symmetric matrix with sigma . A3 sigma = E_sigma(A1): diagonal
/// from the six basis loads, off-diagonal by polarization (21 oracle calls).
ElasticTensor approx3(const EnergyOracle& oracle, const ElasticTensor& A1);

/// F(mu, kappa) = (1/3) sum_{i<j} E_{sigma^ij}(iso(kappa, mu)) - mu.
double F_eval(const EnergyOracle& oracle, double mu, double kappa);
/// G(mu, kappa) = (1/3) E_Id(iso(kappa, mu)) - kappa.
double G_eval(const EnergyOracle& oracle, double mu, double kappa);

struct FixedPointOptions {
  double tol = 1e-6;
  double bisect_tol = 1e-8;  // absolute, in moduli
  int max_outer = 200;
  std::optional<IsoModuli> initial;  // seed iterate; band midpoint otherwise
};

struct FixedPointTrace {
  struct Step {
    double kappa;
    double mu;
    double F_res;
    double G_res;
  };
  std::vector<Step> iterates;
  bool converged = false;
  double tol = 0.0;
};

/// Outer fixed-point failure; carries the iterate trace.
class FixedPointError : public std::runtime_error {
 public:
  FixedPointError(const std::string& what, FixedPointTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const FixedPointTrace& trace() const { return trace_; }

 private:
  FixedPointTrace trace_;
};

/// Self-consistent isotropic tensor: alternating scalar bisections
/// mu_hat(kappa) on [alpha/2, beta/2] and kappa_hat(mu) on [alpha, beta],
/// outer map iterated with 0.5 damping on residual increase. Bracket sign
/// failures signal an oracle outside the comparison bounds.
std::pair<IsoModuli, FixedPointTrace> approx4_selfconsistent(const EnergyOracle& oracle,
                                                             const EllipticityBand& band,
                                                             const FixedPointOptions& opts = {});

/// Bundle of the four approximations plus solver metadata, as assembled by
/// the pipeline.
struct EffectiveTensorReport {
  IsoModuli A1{1.0, 0.5};
  std::optional<ElasticTensor> A2;
  std::optional<double> A2_asymmetry;
  std::optional<ElasticTensor> A3;
  std::optional<IsoModuli> A4;
  std::optional<FixedPointTrace> A4_trace;
  double L = 0.0;
  int nx = 0;
  double cg_tol = 0.0;
  double seconds = 0.0;
};

}  // namespace homog
