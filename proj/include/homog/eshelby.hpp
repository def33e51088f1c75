#pragma once

#include "homog/layer_potentials.hpp"
#include "homog/tensor.hpp"

namespace homog {

/// Constant isotropic inclusion (unit ball) in an infinite isotropic matrix
/// under the loading sigma.
struct EshelbyConfig {
  IsoModuli inclusion;
  IsoModuli matrix;
  SymMat sigma;
};

/// Closed-form solution: w(x) = C x inside the ball and the single layer
/// potential of varphi_C (matrix moduli) outside; continuous across the
/// sphere.
struct EshelbySolution {
  SymMat interior;
  BoundaryField exterior_density;
};

/// The constant interior strain matrix C, assembled from the basis formulas
/// by linearity in sigma.
SymMat interior_matrix(const EshelbyConfig& cfg);

EshelbySolution solve(const EshelbyConfig& cfg);

struct DisplacementValue {
  Vec3 value;
  /// Set for exterior points within distance 0.05 of the sphere, where the
  /// kernel is near-singular; such evaluations use a 4x upsampled rule.
  bool near_boundary_warning = false;
};

DisplacementValue displacement(const EshelbyConfig& cfg, const EshelbySolution& sol, const Vec3& x,
                               const SphereQuadrature& quad);

/// Normal-stress jump [[T w]](x) across the sphere from the closed interior
/// and exterior traces; must match traction_jump_rhs. Throws off the sphere.
Vec3 traction_jump(const EshelbyConfig& cfg, const EshelbySolution& sol, const Vec3& x);

/// The prescribed jump (2(mu-mu0) sigma + (lambda-lambda0) tr(sigma) Id) x.
Vec3 traction_jump_rhs(const EshelbyConfig& cfg, const Vec3& x);

/// Exterior normal-stress trace on the sphere from the spectral form of the
/// adjoint double layer operator.
Vec3 exterior_traction(const EshelbyConfig& cfg, const EshelbySolution& sol, const Vec3& x);

/// Normalized energy E^{A0}_sigma(A) of the embedded problem:
///   2 mu0 sigma.(sigma+C) + lambda0 tr(sigma+C) tr(sigma)
///   - 2 mu tr(C sigma) - lambda tr(sigma) tr(C).
double energy(const EshelbyConfig& cfg);

// Specialized closed forms, kept as independent cross-checks of energy().
/// k != l basis load: mu0 - 2 (mu-mu0)^2 / (2 mu0 + (14mu+9l)/(8mu+3l) mu).
double energy_shear_closed(const IsoModuli& inclusion, const IsoModuli& matrix);
/// sigma = sigma^kk basis load (two-term formula).
double energy_diag_closed(const IsoModuli& inclusion, const IsoModuli& matrix);
/// sigma = Id: E = 3 (kappa0 - (kappa0-kappa)^2/(kappa0+4mu)).
double energy_bulk_closed(const IsoModuli& inclusion, const IsoModuli& matrix);

}  // namespace homog
