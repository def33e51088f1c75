#include "homog/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace homog {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;

// Mandel vector of the 3x3 identity.
Vec6 identity_mandel() {
  Vec6 v = Vec6::Zero();
  v[0] = v[1] = v[2] = 1.0;
  return v;
}
}  // namespace

SymMat SymMat::from_matrix(const Mat3& a) {
  Vec6 v;
  v[0] = a(0, 0);
  v[1] = a(1, 1);
  v[2] = a(2, 2);
  v[3] = kSqrt2 * a(1, 2);
  v[4] = kSqrt2 * a(0, 2);
  v[5] = kSqrt2 * a(0, 1);
  return SymMat(v);
}

SymMat SymMat::identity() { return SymMat(identity_mandel()); }

Mat3 SymMat::to_matrix() const {
  Mat3 a;
  a(0, 0) = m_[0];
  a(1, 1) = m_[1];
  a(2, 2) = m_[2];
  a(1, 2) = a(2, 1) = m_[3] / kSqrt2;
  a(0, 2) = a(2, 0) = m_[4] / kSqrt2;
  a(0, 1) = a(1, 0) = m_[5] / kSqrt2;
  return a;
}

SymMat SymMat::deviator() const {
  Vec6 v = m_;
  const double t = trace() / 3.0;
  v[0] -= t;
  v[1] -= t;
  v[2] -= t;
  return SymMat(v);
}

ElasticTensor::ElasticTensor(const Mat6& a) {
  const double asym = (a - a.transpose()).norm();
  const double scale = a.norm();
  if (asym > 1e-9 * scale + 1e-300)
    throw std::invalid_argument("ElasticTensor: Mandel matrix is not symmetric");
  a_ = 0.5 * (a + a.transpose());
}

Vec6 ElasticTensor::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Mat6> es(a_, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

IsoModuli::IsoModuli(double kappa_, double mu_) : kappa(kappa_), mu(mu_) {
  if (!(kappa > 0.0) || !(mu > 0.0))
    throw std::domain_error("IsoModuli: kappa and mu must be positive");
}

EllipticityBand::EllipticityBand(double alpha_, double beta_)
    : EllipticityBand(alpha_, beta_, alpha_ / 2.0, 2.0 * beta_) {}

EllipticityBand::EllipticityBand(double alpha_, double beta_, double alpha_minus_, double beta_plus_)
    : alpha(alpha_), beta(beta_), alpha_minus(alpha_minus_), beta_plus(beta_plus_) {
  if (!(0.0 < alpha_minus && alpha_minus < alpha && alpha < beta && beta < beta_plus))
    throw std::invalid_argument("EllipticityBand: need 0 < alpha_minus < alpha < beta < beta_plus");
}

SymMat canonical_basis(int i, int j) {
  if (i < 1 || i > 3 || j < 1 || j > 3)
    throw std::invalid_argument("canonical_basis: indices must lie in 1..3");
  Mat3 a = Mat3::Zero();
  a(i - 1, j - 1) += 0.5;
  a(j - 1, i - 1) += 0.5;
  return SymMat::from_matrix(a);
}

ElasticTensor iso_to_full(const IsoModuli& m) {
  // kappa on the hydrostatic projector, 2 mu on its complement.
  const Vec6 id = identity_mandel();
  const Mat6 J = (id * id.transpose()) / 3.0;
  const Mat6 K = Mat6::Identity() - J;
  return ElasticTensor(m.kappa * J + 2.0 * m.mu * K);
}

bool in_class_M(const ElasticTensor& a, const EllipticityBand& band) {
  const Vec6 ev = a.eigenvalues();
  const double slack = 1e-10 * band.beta;
  return ev[0] >= band.alpha - slack && ev[5] <= band.beta + slack;
}

IsoModuli iso_projection(const ElasticTensor& a) {
  const Vec6 id = identity_mandel();
  const double kappa = id.dot(a.mandel() * id) / 3.0;
  const double two_mu = (a.mandel().trace() - kappa) / 5.0;
  return IsoModuli(kappa, two_mu / 2.0);
}

bool is_isotropic(const ElasticTensor& a, double rel_tol) {
  const IsoModuli m = iso_projection(a);
  const ElasticTensor p = iso_to_full(m);
  return (a.mandel() - p.mandel()).norm() <= rel_tol * a.mandel().norm();
}

}  // namespace homog
