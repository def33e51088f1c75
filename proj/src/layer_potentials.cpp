#include "homog/layer_potentials.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace homog {

namespace {

constexpr double kPi = std::numbers::pi;

// Gauss-Legendre nodes/weights on (-1, 1) by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 0; k < n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k + 1.0) * z * p1 - k * p2) / (k + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
}

// integral over the sphere of x^a y^b z^c: zero for any odd exponent, else
// 4 pi (a-1)!!(b-1)!!(c-1)!! / (a+b+c+1)!!.
double monomial_moment(int a, int b, int c) {
  if (a % 2 || b % 2 || c % 2) return 0.0;
  auto dfact = [](int k) {
    double r = 1.0;
    for (int v = k; v > 1; v -= 2) r *= v;
    return r;
  };
  return 4.0 * kPi * dfact(a - 1) * dfact(b - 1) * dfact(c - 1) / dfact(a + b + c + 1);
}

bool near_unit_sphere(const Vec3& x) { return std::abs(x.norm() - 1.0) < 1e-12; }

// Orthonormal tangent frame at a unit vector.
void tangent_frame(const Vec3& n, Vec3& t1, Vec3& t2) {
  const Vec3 seed = std::abs(n[0]) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  t1 = n.cross(seed).normalized();
  t2 = n.cross(t1);
}

}  // namespace

SphereQuadrature SphereQuadrature::product_rule(int n_theta, int n_phi) {
  if (n_theta < 2 || n_phi < 4)
    throw std::invalid_argument("SphereQuadrature: order too low");
  SphereQuadrature q;
  q.n_theta_ = n_theta;
  q.n_phi_ = n_phi;
  q.degree_ = std::min(2 * n_theta - 1, n_phi - 1);

  std::vector<double> gx, gw;
  gauss_legendre(n_theta, gx, gw);
  const double wphi = 2.0 * kPi / n_phi;
  q.nodes_.reserve(static_cast<size_t>(n_theta) * n_phi);
  q.weights_.reserve(static_cast<size_t>(n_theta) * n_phi);
  for (int i = 0; i < n_theta; ++i) {
    const double ct = gx[i];
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int j = 0; j < n_phi; ++j) {
      const double phi = wphi * j;
      q.nodes_.emplace_back(st * std::cos(phi), st * std::sin(phi), ct);
      q.weights_.push_back(gw[i] * wphi);
    }
  }

  // Validate against analytic monomial moments up to the declared degree
  // (capped; high degrees add nothing to the check).
  const int dmax = std::min(q.degree_, 8);
  for (int a = 0; a <= dmax; ++a)
    for (int b = 0; a + b <= dmax; ++b)
      for (int c = 0; a + b + c <= dmax; ++c) {
        double s = 0.0;
        for (size_t k = 0; k < q.nodes_.size(); ++k) {
          const Vec3& p = q.nodes_[k];
          s += q.weights_[k] * std::pow(p[0], a) * std::pow(p[1], b) * std::pow(p[2], c);
        }
        const double ref = monomial_moment(a, b, c);
        if (std::abs(s - ref) > 1e-12 * 4.0 * kPi)
          throw std::invalid_argument("SphereQuadrature: moment validation failed");
      }
  return q;
}

HarmonicIndex::HarmonicIndex(HarmonicKind kind_, int l_, int m_) : kind(kind_), l(l_), m(m_) {
  if (l < 0 || std::abs(m) > l)
    throw std::invalid_argument("HarmonicIndex: need l >= 0 and |m| <= l");
  if (kind == HarmonicKind::X && l < 1)
    throw std::invalid_argument("HarmonicIndex: kind X requires l >= 1");
}

BoundaryField field_z0() {
  return {.eval = [](const Vec3& x) { return x; }, .label = "Z0"};
}

BoundaryField field_zi(int i) {
  if (i < 1 || i > 3) throw std::invalid_argument("field_zi: index out of range");
  return {.eval = [i](const Vec3& x) { return Vec3(x[i - 1] * Vec3::Unit(i - 1) - x / 3.0); },
          .label = "Z" + std::to_string(i)};
}

BoundaryField field_zij(int i, int j) {
  if (i < 1 || i > 3 || j < 1 || j > 3 || i == j)
    throw std::invalid_argument("field_zij: needs distinct indices in 1..3");
  return {.eval = [i, j](const Vec3& x) {
            return Vec3(x[i - 1] * Vec3::Unit(j - 1) - x[j - 1] * Vec3::Unit(i - 1));
          },
          .label = "Z" + std::to_string(i) + std::to_string(j)};
}

BoundaryField field_rij(int i, int j) {
  if (i < 1 || i > 3 || j < 1 || j > 3 || i == j)
    throw std::invalid_argument("field_rij: needs distinct indices in 1..3");
  return {.eval = [i, j](const Vec3& x) {
            return Vec3(x[i - 1] * Vec3::Unit(j - 1) + x[j - 1] * Vec3::Unit(i - 1));
          },
          .label = "R" + std::to_string(i) + std::to_string(j)};
}

Mat3 green_function(const IsoModuli& m, const Vec3& x, const Vec3& y) {
  const Vec3 d = x - y;
  const double r = d.norm();
  if (r == 0.0) throw std::domain_error("green_function: evaluation at the singularity x = y");
  const double mu = m.mu, lam = m.lambda();
  const double c1 = (lam + 3.0 * mu) / (lam + 2.0 * mu);
  const double c2 = (lam + mu) / (lam + 2.0 * mu);
  return (c1 * Mat3::Identity() + c2 * (d * d.transpose()) / (r * r)) / (8.0 * kPi * mu * r);
}

Mat3 single_layer_kernel_mean(const IsoModuli& m, const Vec3& x) {
  // integral of 1/|x-y| over the sphere is 4 pi at |x| = 1, and of
  // (x-y)(x-y)^T/|x-y|^3 is (4 pi / 3) I (the x x^T part integrates out).
  // The result is (c1/2 + c2/6)/mu I, which is exactly the l = 1 W
  // eigenvalue (5 mu + 2 lambda)/(3 mu (2 mu + lambda)): a constant field
  // on the sphere is a pure degree-1 W harmonic.
  (void)x;
  const double mu = m.mu, lam = m.lambda();
  const double c1 = (lam + 3.0 * mu) / (lam + 2.0 * mu);
  const double c2 = (lam + mu) / (lam + 2.0 * mu);
  return (c1 / 2.0 + c2 / 6.0) / mu * Mat3::Identity();
}

Vec3 single_layer_apply(const IsoModuli& m, const BoundaryField& density, const SphereQuadrature& quad,
                        const Vec3& x) {
  if (!near_unit_sphere(x)) {
    Vec3 acc = Vec3::Zero();
    const auto& nodes = quad.nodes();
    const auto& w = quad.weights();
    for (size_t k = 0; k < nodes.size(); ++k)
      acc += w[k] * (green_function(m, x, nodes[k]) * density(nodes[k]));
    return acc;
  }

  // On-sphere evaluation: polar rule centered at x. With y(gamma, psi) on
  // the circle of polar angle gamma around x, dS = sin(gamma) dgamma dpsi
  // and sin(gamma)/|x - y| = cos(gamma/2), so the integrand below is smooth
  // and Gauss-Legendre in gamma converges spectrally.
  const Vec3 n = x.normalized();
  Vec3 t1, t2;
  tangent_frame(n, t1, t2);

  std::vector<double> gx, gw;
  gauss_legendre(quad.n_theta(), gx, gw);
  const int nphi = quad.n_phi();
  const double wpsi = 2.0 * kPi / nphi;

  Vec3 acc = Vec3::Zero();
  for (int i = 0; i < quad.n_theta(); ++i) {
    const double gamma = kPi * (gx[i] + 1.0) / 2.0;
    const double wg = (kPi / 2.0) * gw[i] * std::sin(gamma);
    const double cg = std::cos(gamma), sg = std::sin(gamma);
    for (int j = 0; j < nphi; ++j) {
      const double psi = wpsi * j;
      const Vec3 y = cg * n + sg * (std::cos(psi) * t1 + std::sin(psi) * t2);
      acc += (wg * wpsi) * (green_function(m, n, y) * density(y));
    }
  }
  return acc;
}

double single_layer_eigenvalue(const HarmonicIndex& idx, const IsoModuli& m) {
  const double mu = m.mu, lam = m.lambda();
  const double l = idx.l;
  switch (idx.kind) {
    case HarmonicKind::V:
      return ((3.0 * l + 1.0) * mu + l * lam) / ((2.0 * l + 3.0) * (2.0 * l + 1.0) * mu * (2.0 * mu + lam));
    case HarmonicKind::W:
      return ((3.0 * l + 2.0) * mu + (l + 1.0) * lam) /
             ((2.0 * l - 1.0) * (2.0 * l + 1.0) * mu * (2.0 * mu + lam));
    case HarmonicKind::X:
      return 1.0 / (mu * (2.0 * l + 1.0));
  }
  throw std::logic_error("single_layer_eigenvalue: unreachable");
}

double dstar_eigenvalue(const HarmonicIndex& idx, const IsoModuli& m) {
  const double mu = m.mu, lam = m.lambda();
  const double l = idx.l;
  switch (idx.kind) {
    case HarmonicKind::V:
      return -(2.0 * (2.0 * l * l + 6.0 * l + 1.0) * mu - 3.0 * lam) /
             (2.0 * (2.0 * l + 1.0) * (2.0 * l + 3.0) * (2.0 * mu + lam));
    case HarmonicKind::W:
      return (2.0 * (2.0 * l * l - 2.0 * l - 3.0) * mu - 3.0 * lam) /
             (2.0 * (2.0 * l + 1.0) * (2.0 * l - 1.0) * (2.0 * mu + lam));
    case HarmonicKind::X:
      return 1.0 / (2.0 * mu * (2.0 * l + 1.0));
  }
  throw std::logic_error("dstar_eigenvalue: unreachable");
}

BoundaryField varphi_density(const IsoModuli& m, const SymMat& C) {
  const double mu = m.mu, lam = m.lambda();
  const double a = 15.0 * mu * (2.0 * mu + lam) / (8.0 * mu + 3.0 * lam);
  const double b = 3.0 * (mu + lam) * (2.0 * mu + lam) / (8.0 * mu + 3.0 * lam);
  const Mat3 M = a * C.to_matrix() + b * C.trace() * Mat3::Identity();
  return {.eval = [M](const Vec3& x) { return Vec3(M * x); }, .label = "varphi_C"};
}

BoundaryField psi_density(const IsoModuli& m, const Mat3& S) {
  if ((S + S.transpose()).norm() > 1e-12 * (S.norm() + 1e-300))
    throw std::invalid_argument("psi_density: S must be skew-symmetric");
  const Mat3 M = 3.0 * m.mu * S;
  return {.eval = [M](const Vec3& x) { return Vec3(M * x); }, .label = "psi_S"};
}

}  // namespace homog
