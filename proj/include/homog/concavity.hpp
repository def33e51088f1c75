#pragma once

#include <utility>
#include <vector>

#include "homog/schemes.hpp"
#include "homog/tensor.hpp"

namespace homog {

/// Coefficients of the shear-energy curvature polynomial
/// F(mu) = c2 (mu-mu0)^2 + c1 (mu-mu0) + c0 with
///   gamma0 = 2 mu0 (6mu+kappa) + (8mu+3kappa) mu,
///   gamma1 = 12 mu0 + 16 mu + 3 kappa,  gamma2 = 6 mu + kappa,
/// whose discriminant satisfies -Delta = 640 gamma0^3 kappa^2.
struct ConcavityWitness {
  double gamma0;
  double gamma1;
  double gamma2;
  double c0;
  double c1;
  double c2;
  double discriminant;  // c1^2 - 4 c2 c0
  double F_at_mu0;      // = c0
};

/// Second derivative f''(mu) = F(mu)/gamma0^3 of the subtracted term in the
/// shear energy mu0 - f(mu), together with the witness. Positive f'' is the
/// strict concavity of the energy slice.
std::pair<double, ConcavityWitness> shear_energy_second_derivative(double mu0, double kappa, double mu);

/// d^2/dkappa^2 of kappa0 - (kappa0-kappa)^2/(kappa0+4mu) = -2/(kappa0+4mu).
double bulk_energy_second_derivative(double kappa0, double mu, double kappa);

struct AffineCounterexample {
  std::vector<double> t;
  std::vector<double> value;  // (1/3) E_Id along the segment
  double slope;               // least-squares line through the samples
  double intercept;
  double max_deviation;       // max |value - line|
};

/// The segment kappa(t) = t beta + (1-t)(alpha+beta)/2,
/// mu(t) = t 5alpha/4 + (1-t) alpha/2 with kappa0 = alpha, along which the
/// bulk energy is exactly affine: f(t) = alpha - (alpha-beta)^2 (1+t)/(12 alpha).
/// Requires beta >= 5 alpha / 2.
AffineCounterexample affine_counterexample(double alpha, double beta, int samples = 11);

struct ConcavityProbeReport {
  std::vector<double> t;             // Chebyshev-spaced parameters in [0,1]
  std::vector<double> value;         // E_sigma along the segment
  double max_midpoint_violation;     // max(0, (f(a)+f(b))/2 - f(mid)) over pairs
  double min_second_difference;      // divided-difference estimates of f''
  double max_second_difference;
};

/// Samples E_sigma along the segment (1-t) A0 + t A1 and reports concavity
/// diagnostics; the numerical stand-in for the perturbative concavity
/// argument on heterogeneous fields.
ConcavityProbeReport energy_concavity_probe(const EnergyOracle& oracle, const ElasticTensor& A0,
                                            const ElasticTensor& A1, const SymMat& sigma, int samples);

}  // namespace homog
