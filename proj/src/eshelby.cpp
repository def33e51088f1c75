#include "homog/eshelby.hpp"

#include <cmath>
#include <stdexcept>

namespace homog {

namespace {

// Shared rational coefficients of the closed-form solution.
struct Coeffs {
  double mu0, lam0, mu, lam;
  double shear_denom;   // 2 mu0 + (14mu+9lam)/(8mu+3lam) mu
  double trace_factor;  // lam0 + (6mu+lam)/(8mu+3lam) mu
  double bulk_denom;    // 2 mu0 + 3 lam0 + 4 mu
};

Coeffs coeffs(const EshelbyConfig& cfg) {
  Coeffs c;
  c.mu0 = cfg.inclusion.mu;
  c.lam0 = cfg.inclusion.lambda();
  c.mu = cfg.matrix.mu;
  c.lam = cfg.matrix.lambda();
  c.shear_denom = 2.0 * c.mu0 + (14.0 * c.mu + 9.0 * c.lam) / (8.0 * c.mu + 3.0 * c.lam) * c.mu;
  c.trace_factor = c.lam0 + (6.0 * c.mu + c.lam) / (8.0 * c.mu + 3.0 * c.lam) * c.mu;
  c.bulk_denom = 2.0 * c.mu0 + 3.0 * c.lam0 + 4.0 * c.mu;
  return c;
}

bool on_unit_sphere(const Vec3& x) { return std::abs(x.norm() - 1.0) <= 1e-10; }

}  // namespace

SymMat interior_matrix(const EshelbyConfig& cfg) {
  const Coeffs c = coeffs(cfg);
  const double shear_coef = 2.0 * (c.mu - c.mu0) / c.shear_denom;
  // Diagonal basis loads add the same multiple of Id on top of the shear
  // part; the loading decomposes as sigma = sum_k s_kk sigma^kk
  // + sum_{k<l} 2 s_kl sigma^kl.
  const double diag_id_coef =
      ((c.lam - c.lam0) - 2.0 * (c.mu - c.mu0) * c.trace_factor / c.shear_denom) / c.bulk_denom;

  const Mat3 s = cfg.sigma.to_matrix();
  Mat3 C = shear_coef * s;
  C += diag_id_coef * s.trace() * Mat3::Identity();
  return SymMat::from_matrix(C);
}

EshelbySolution solve(const EshelbyConfig& cfg) {
  const SymMat C = interior_matrix(cfg);
  return {C, varphi_density(cfg.matrix, C)};
}

DisplacementValue displacement(const EshelbyConfig& cfg, const EshelbySolution& sol, const Vec3& x,
                               const SphereQuadrature& quad) {
  const double r = x.norm();
  if (r <= 1.0) return {Vec3(sol.interior.to_matrix() * x), false};
  if (r < 1.05) {
    const SphereQuadrature fine = quad.refined(4);
    return {single_layer_apply(cfg.matrix, sol.exterior_density, fine, x), true};
  }
  return {single_layer_apply(cfg.matrix, sol.exterior_density, quad, x), false};
}

Vec3 traction_jump(const EshelbyConfig& cfg, const EshelbySolution& sol, const Vec3& x) {
  if (!on_unit_sphere(x)) throw std::invalid_argument("traction_jump: x must lie on the unit sphere");
  const Coeffs c = coeffs(cfg);
  const Mat3 C = sol.interior.to_matrix();
  return c.shear_denom * (C * x) + c.trace_factor * C.trace() * x;
}

Vec3 traction_jump_rhs(const EshelbyConfig& cfg, const Vec3& x) {
  const Coeffs c = coeffs(cfg);
  const Mat3 s = cfg.sigma.to_matrix();
  return 2.0 * (c.mu - c.mu0) * (s * x) + (c.lam - c.lam0) * s.trace() * x;
}

Vec3 exterior_traction(const EshelbyConfig& cfg, const EshelbySolution& sol, const Vec3& x) {
  if (!on_unit_sphere(x)) throw std::invalid_argument("exterior_traction: x must lie on the unit sphere");
  const Coeffs c = coeffs(cfg);
  const Mat3 C = sol.interior.to_matrix();
  const double f = c.mu / (8.0 * c.mu + 3.0 * c.lam);
  return -(14.0 * c.mu + 9.0 * c.lam) * f * (C * x) - (6.0 * c.mu + c.lam) * f * C.trace() * x;
}

double energy(const EshelbyConfig& cfg) {
  const Coeffs c = coeffs(cfg);
  const SymMat C = interior_matrix(cfg);
  const SymMat& s = cfg.sigma;
  return 2.0 * c.mu0 * s.dot(s + C) + c.lam0 * (s.trace() + C.trace()) * s.trace() -
         2.0 * c.mu * C.dot(s) - c.lam * s.trace() * C.trace();
}

double energy_shear_closed(const IsoModuli& inclusion, const IsoModuli& matrix) {
  const double mu0 = inclusion.mu, mu = matrix.mu, lam = matrix.lambda();
  const double denom = 2.0 * mu0 + (14.0 * mu + 9.0 * lam) / (8.0 * mu + 3.0 * lam) * mu;
  return mu0 - 2.0 * (mu - mu0) * (mu - mu0) / denom;
}

double energy_diag_closed(const IsoModuli& inclusion, const IsoModuli& matrix) {
  const double mu0 = inclusion.mu, lam0 = inclusion.lambda();
  const double mu = matrix.mu, lam = matrix.lambda();
  const double D = 2.0 * mu0 + (14.0 * mu + 9.0 * lam) / (8.0 * mu + 3.0 * lam) * mu;
  const double c_id = ((lam - lam0) - 2.0 * (mu - mu0) * (lam0 + (6.0 * mu + lam) / (8.0 * mu + 3.0 * lam) * mu) / D) /
                      (2.0 * mu0 + 3.0 * lam0 + 4.0 * mu);
  return 2.0 * mu0 + lam0 + (2.0 * (mu0 - mu) + 3.0 * (lam0 - lam)) * c_id +
         (2.0 * (mu0 - mu) + (lam0 - lam)) * 2.0 * (mu - mu0) / D;
}

double energy_bulk_closed(const IsoModuli& inclusion, const IsoModuli& matrix) {
  const double k0 = inclusion.kappa, k = matrix.kappa, mu = matrix.mu;
  return 3.0 * (k0 - (k0 - k) * (k0 - k) / (k0 + 4.0 * mu));
}

}  // namespace homog
