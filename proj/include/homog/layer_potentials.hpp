#pragma once

#include <functional>
#include <string>
#include <vector>

#include "homog/tensor.hpp"

namespace homog {

/// Quadrature on the unit sphere: product of Gauss-Legendre nodes in
/// cos(theta) and a uniform trapezoid rule in phi. Exactly integrates
/// spherical polynomials up to the declared degree; moments are validated
/// against the closed-form monomial integrals at construction.
class SphereQuadrature {
 public:
  /// n_theta Gauss-Legendre points, n_phi azimuthal points.
  /// Exact degree is min(2 n_theta - 1, n_phi - 1).
  static SphereQuadrature product_rule(int n_theta, int n_phi);
  static SphereQuadrature default_rule() { return product_rule(32, 64); }

  const std::vector<Vec3>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  int exact_degree() const { return degree_; }
  int n_theta() const { return n_theta_; }
  int n_phi() const { return n_phi_; }

  /// Same node budget with every count scaled by `factor`.
  SphereQuadrature refined(int factor) const { return product_rule(n_theta_ * factor, n_phi_ * factor); }

 private:
  SphereQuadrature() = default;
  std::vector<Vec3> nodes_;
  std::vector<double> weights_;
  int degree_ = 0;
  int n_theta_ = 0;
  int n_phi_ = 0;
};

enum class HarmonicKind { V, W, X };

/// Index (kind, l, m) of a vector spherical harmonic.
struct HarmonicIndex {
  HarmonicKind kind;
  int l;
  int m;
  HarmonicIndex(HarmonicKind kind_, int l_, int m_);
};

/// Vector field on the unit sphere, with a label identifying the closed
/// special fields Z0, Zi, Zij, Rij when applicable.
struct BoundaryField {
  std::function<Vec3(const Vec3&)> eval;
  std::string label = "custom";

  Vec3 operator()(const Vec3& x) const { return eval(x); }
};

// The special fields of the sphere spectrum: x, x_i e_i - x/3,
// x_i e_j - x_j e_i, x_i e_j + x_j e_i (indices 1-based).
BoundaryField field_z0();
BoundaryField field_zi(int i);
BoundaryField field_zij(int i, int j);
BoundaryField field_rij(int i, int j);

/// Kelvin matrix G(x, y) of isotropic elastostatics; symmetric, even in
/// x - y, homogeneous of degree -1. Throws on x = y.
Mat3 green_function(const IsoModuli& m, const Vec3& x, const Vec3& y);

/// Quadrature approximation of the single layer potential
/// (V phi)(x) = integral over the sphere of G(x, y) phi(y) dy.
/// For |x| = 1 (within 1e-12) the weakly singular kernel is integrated with
/// a polar rule centered at x, where sin(gamma)/|x-y| is smooth; off the
/// sphere the plain product rule is used. Linear in the density.
Vec3 single_layer_apply(const IsoModuli& m, const BoundaryField& density, const SphereQuadrature& quad,
                        const Vec3& x);

/// Closed-form eigenvalue of the single layer boundary operator on the
/// harmonic (kind, l, m); independent of m.
double single_layer_eigenvalue(const HarmonicIndex& idx, const IsoModuli& m);

/// Closed-form eigenvalue of the adjoint double layer operator.
double dstar_eigenvalue(const HarmonicIndex& idx, const IsoModuli& m);

/// Density varphi_C with V varphi_C = C x on the sphere, for symmetric C:
/// x -> (15 mu (2mu+l)/(8mu+3l) C + 3 (mu+l)(2mu+l)/(8mu+3l) tr(C) Id) x.
BoundaryField varphi_density(const IsoModuli& m, const SymMat& C);

/// Density psi_S = 3 mu S x with V psi_S = S x on the sphere, for skew S.
/// Throws if S is not skew-symmetric.
BoundaryField psi_density(const IsoModuli& m, const Mat3& S);

/// Analytic integral of G(x, .) over the sphere at |x| = 1; the constant
/// part of the subtract-and-add splitting, kept as a cross-check of the
/// polar rule.
Mat3 single_layer_kernel_mean(const IsoModuli& m, const Vec3& x);

}  // namespace homog
