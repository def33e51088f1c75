#pragma once

#include <Eigen/Dense>

namespace homog {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Symmetric 3x3 matrix stored as an orthonormal (Mandel) 6-vector:
///   (e11, e22, e33, sqrt(2) e23, sqrt(2) e13, sqrt(2) e12).
/// The Mandel dot product equals the Frobenius inner product of the
/// underlying matrices, so norms and energies need no correction factors.
class SymMat {
 public:
  SymMat() : m_(Vec6::Zero()) {}

  static SymMat from_mandel(const Vec6& v) { return SymMat(v); }
  /// Reads the upper triangle; the caller promises a symmetric matrix.
  static SymMat from_matrix(const Mat3& a);
  static SymMat zero() { return SymMat(); }
  static SymMat identity();

  Mat3 to_matrix() const;
  const Vec6& mandel() const { return m_; }

  double dot(const SymMat& o) const { return m_.dot(o.m_); }
  double norm() const { return m_.norm(); }
  double trace() const { return m_[0] + m_[1] + m_[2]; }
  SymMat deviator() const;

  SymMat operator+(const SymMat& o) const { return SymMat(m_ + o.m_); }
  SymMat operator-(const SymMat& o) const { return SymMat(m_ - o.m_); }
  SymMat operator*(double s) const { return SymMat(m_ * s); }
  SymMat operator-() const { return SymMat(-m_); }

 private:
  explicit SymMat(const Vec6& v) : m_(v) {}
  Vec6 m_;
};

inline SymMat operator*(double s, const SymMat& m) { return m * s; }

/// Fourth-order tensor with minor and major symmetries, in Mandel form a
/// symmetric 6x6 matrix. Minor symmetries are implicit in the encoding;
/// major symmetry is the matrix symmetry a = a^T.
class ElasticTensor {
 public:
  ElasticTensor() : a_(Mat6::Zero()) {}
  /// Rejects matrices whose asymmetry exceeds a small relative tolerance;
  /// the stored matrix is the symmetrized input.
  explicit ElasticTensor(const Mat6& a);

  static ElasticTensor zero() { return ElasticTensor(); }

  const Mat6& mandel() const { return a_; }
  SymMat apply(const SymMat& s) const { return SymMat::from_mandel(a_ * s.mandel()); }

  /// Mandel eigenvalues, ascending.
  Vec6 eigenvalues() const;

  ElasticTensor operator+(const ElasticTensor& o) const { return ElasticTensor(a_ + o.a_); }
  ElasticTensor operator-(const ElasticTensor& o) const { return ElasticTensor(a_ - o.a_); }
  ElasticTensor operator*(double s) const { return ElasticTensor(a_ * s); }

 private:
  Mat6 a_;
};

inline ElasticTensor operator*(double s, const ElasticTensor& a) { return a * s; }

/// Isotropic moduli pair (kappa, mu) with kappa = 2 mu + 3 lambda.
/// Both must be positive, which is the positivity condition on the two
/// Mandel eigenvalues kappa and 2 mu.
struct IsoModuli {
  double kappa;
  double mu;

  IsoModuli(double kappa_, double mu_);
  static IsoModuli from_lame(double lambda, double mu) { return IsoModuli(2 * mu + 3 * lambda, mu); }
  double lambda() const { return (kappa - 2 * mu) / 3.0; }
};

/// Ellipticity band [alpha, beta] plus the enclosing extended band
/// (alpha_minus, beta_plus) used by the self-consistent root-finding.
struct EllipticityBand {
  double alpha;
  double beta;
  double alpha_minus;
  double beta_plus;

  EllipticityBand(double alpha_, double beta_);
  EllipticityBand(double alpha_, double beta_, double alpha_minus_, double beta_plus_);
};

/// sigma^ij of the canonical strain basis, entries (d_ik d_jl + d_il d_jk)/2.
/// Indices are 1-based and symmetric in (i, j).
SymMat canonical_basis(int i, int j);

inline SymMat apply(const ElasticTensor& a, const SymMat& s) { return a.apply(s); }

/// A sigma = 2 mu sigma + lambda tr(sigma) Id as a Mandel matrix. The two
/// distinct eigenvalues are kappa (on Id/sqrt(3)) and 2 mu (multiplicity 5).
ElasticTensor iso_to_full(const IsoModuli& m);

/// Eigenvalue containment alpha <= spec(a) <= beta with relative slack 1e-10.
bool in_class_M(const ElasticTensor& a, const EllipticityBand& band);

/// sigma . A sigma.
inline double energy_quadratic(const ElasticTensor& a, const SymMat& s) {
  return s.mandel().dot(a.mandel() * s.mandel());
}

/// Orthogonal projection of A onto the isotropic family:
/// kappa = (Id . A Id)/3, 2 mu = (tr a - kappa)/5.
IsoModuli iso_projection(const ElasticTensor& a);

/// True when A is within rel_tol (Frobenius) of its isotropic projection.
bool is_isotropic(const ElasticTensor& a, double rel_tol = 1e-9);

}  // namespace homog
