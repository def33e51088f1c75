#include "homog/concavity.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace homog {

std::pair<double, ConcavityWitness> shear_energy_second_derivative(double mu0, double kappa, double mu) {
  if (!(mu0 > 0.0) || !(kappa > 0.0) || !(mu > 0.0))
    throw std::domain_error("shear_energy_second_derivative: arguments must be positive");
  ConcavityWitness w;
  w.gamma0 = 2.0 * mu0 * (6.0 * mu + kappa) + (8.0 * mu + 3.0 * kappa) * mu;
  w.gamma1 = 12.0 * mu0 + 16.0 * mu + 3.0 * kappa;
  w.gamma2 = 6.0 * mu + kappa;
  w.c2 = 4.0 * (-6.0 * w.gamma0 * w.gamma1 - 8.0 * w.gamma0 * w.gamma2 + w.gamma1 * w.gamma1 * w.gamma2);
  w.c1 = 48.0 * w.gamma0 * w.gamma0 - 8.0 * w.gamma0 * w.gamma1 * w.gamma2;
  w.c0 = 4.0 * w.gamma0 * w.gamma0 * w.gamma2;
  w.discriminant = w.c1 * w.c1 - 4.0 * w.c2 * w.c0;
  w.F_at_mu0 = w.c0;
  const double d = mu - mu0;
  const double F = w.c2 * d * d + w.c1 * d + w.c0;
  return {F / (w.gamma0 * w.gamma0 * w.gamma0), w};
}

double bulk_energy_second_derivative(double kappa0, double mu, double kappa) {
  if (!(kappa0 > 0.0) || !(mu > 0.0) || !(kappa > 0.0))
    throw std::domain_error("bulk_energy_second_derivative: arguments must be positive");
  (void)kappa;  // the closed form is curvature-constant in kappa
  return -2.0 / (kappa0 + 4.0 * mu);
}

AffineCounterexample affine_counterexample(double alpha, double beta, int samples) {
  if (!(alpha > 0.0) || !(beta > alpha))
    throw std::invalid_argument("affine_counterexample: need 0 < alpha < beta");
  if (beta < 2.5 * alpha)
    throw std::invalid_argument("affine_counterexample: hypothesis beta >= 5 alpha / 2 violated");
  if (samples < 3) throw std::invalid_argument("affine_counterexample: need at least 3 samples");

  const double kappa0 = alpha;
  AffineCounterexample out;
  out.t.resize(samples);
  out.value.resize(samples);
  double st = 0, sv = 0, stt = 0, stv = 0;
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    const double kappa = t * beta + (1.0 - t) * 0.5 * (alpha + beta);
    const double mu = t * 1.25 * alpha + (1.0 - t) * 0.5 * alpha;
    const double f = kappa0 - (kappa0 - kappa) * (kappa0 - kappa) / (kappa0 + 4.0 * mu);
    out.t[i] = t;
    out.value[i] = f;
    st += t;
    sv += f;
    stt += t * t;
    stv += t * f;
  }
  const double n = samples;
  out.slope = (n * stv - st * sv) / (n * stt - st * st);
  out.intercept = (sv - out.slope * st) / n;
  out.max_deviation = 0.0;
  for (int i = 0; i < samples; ++i)
    out.max_deviation = std::max(out.max_deviation,
                                 std::abs(out.value[i] - (out.intercept + out.slope * out.t[i])));
  return out;
}

ConcavityProbeReport energy_concavity_probe(const EnergyOracle& oracle, const ElasticTensor& A0,
                                            const ElasticTensor& A1, const SymMat& sigma, int samples) {
  if (samples < 3) throw std::invalid_argument("energy_concavity_probe: need at least 3 samples");
  ConcavityProbeReport rep;
  rep.t.resize(samples);
  for (int i = 0; i < samples; ++i) {
    // Chebyshev points mapped to [0,1], endpoints included, ascending.
    const double c = std::cos(std::numbers::pi * (samples - 1 - i) / (samples - 1));
    rep.t[i] = 0.5 * (1.0 + c);
  }
  rep.t.front() = 0.0;
  rep.t.back() = 1.0;

  const auto at = [&](double t) {
    const ElasticTensor a((1.0 - t) * A0.mandel() + t * A1.mandel());
    return oracle(a, sigma);
  };
  rep.value.resize(samples);
  for (int i = 0; i < samples; ++i) rep.value[i] = at(rep.t[i]);

  rep.max_midpoint_violation = 0.0;
  for (int i = 0; i + 1 < samples; ++i) {
    const double tm = 0.5 * (rep.t[i] + rep.t[i + 1]);
    const double fm = at(tm);
    rep.max_midpoint_violation =
        std::max(rep.max_midpoint_violation, 0.5 * (rep.value[i] + rep.value[i + 1]) - fm);
  }

  rep.min_second_difference = 1e300;
  rep.max_second_difference = -1e300;
  for (int i = 1; i + 1 < samples; ++i) {
    const double t0 = rep.t[i - 1], t1 = rep.t[i], t2 = rep.t[i + 1];
    const double d01 = (rep.value[i] - rep.value[i - 1]) / (t1 - t0);
    const double d12 = (rep.value[i + 1] - rep.value[i]) / (t2 - t1);
    const double dd = 2.0 * (d12 - d01) / (t2 - t0);  // estimate of f''
    rep.min_second_difference = std::min(rep.min_second_difference, dd);
    rep.max_second_difference = std::max(rep.max_second_difference, dd);
  }
  return rep;
}

}  // namespace homog
