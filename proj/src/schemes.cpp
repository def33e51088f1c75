#include "homog/schemes.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include "homog/eshelby.hpp"

namespace homog {

namespace {

std::string energy_key(const ElasticTensor& a, const SymMat& s) {
  std::string key(reinterpret_cast<const char*>(a.mandel().data()), sizeof(double) * 36);
  key.append(reinterpret_cast<const char*>(s.mandel().data()), sizeof(double) * 6);
  return key;
}

std::vector<SolveAudit>& audit_log_mutable() {
  static std::vector<SolveAudit> log;
  return log;
}

std::mutex& audit_mutex() {
  static std::mutex m;
  return m;
}

SymMat mandel_unit(int k) {
  Vec6 v = Vec6::Zero();
  v[k] = 1.0;
  return SymMat::from_mandel(v);
}

}  // namespace

struct EnergyOracle::Cache {
  std::mutex mutex;
  std::unordered_map<std::string, double> values;
};

EnergyOracle::EnergyOracle(Backend backend, std::function<double(const ElasticTensor&, const SymMat&)> fn)
    : backend_(backend), fn_(std::move(fn)), cache_(std::make_shared<Cache>()) {}

double EnergyOracle::operator()(const ElasticTensor& exterior, const SymMat& sigma) const {
  const std::string key = energy_key(exterior, sigma);
  {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    const auto it = cache_->values.find(key);
    if (it != cache_->values.end()) return it->second;
  }
  const double v = fn_(exterior, sigma);
  std::lock_guard<std::mutex> lock(cache_->mutex);
  cache_->values.emplace(key, v);
  return v;
}

EnergyOracle make_eshelby_oracle(const IsoModuli& inclusion) {
  return EnergyOracle(EnergyOracle::Backend::closed_form_eshelby,
                      [inclusion](const ElasticTensor& exterior, const SymMat& sigma) {
                        if (!is_isotropic(exterior, 1e-8))
                          throw std::invalid_argument("eshelby oracle: exterior tensor must be isotropic");
                        const EshelbyConfig cfg{inclusion, iso_projection(exterior), sigma};
                        return energy(cfg);
                      });
}

const std::vector<SolveAudit>& solve_audit_log() { return audit_log_mutable(); }

void clear_solve_audit_log() {
  std::lock_guard<std::mutex> lock(audit_mutex());
  audit_log_mutable().clear();
}

void append_solve_audit(const SolveAudit& audit) {
  std::lock_guard<std::mutex> lock(audit_mutex());
  audit_log_mutable().push_back(audit);
}

EnergyOracle make_fem_oracle(const VoxelField& field, const SolverConfig& cfg) {
  struct State {
    EmbeddedSolver solver;
    std::mutex mutex;
    Mat6 current_exterior;
    std::unordered_map<std::string, Eigen::VectorXd> warm;
    SolverConfig cfg;
    State(const VoxelField& f, const ElasticTensor& ext, const SolverConfig& c)
        : solver(f, ext, c), current_exterior(ext.mandel()), cfg(c) {}
  };
  const ElasticTensor seed_ext = iso_to_full(IsoModuli(field.band().alpha, field.band().alpha / 2.0));
  auto state = std::make_shared<State>(field, seed_ext, cfg);

  return EnergyOracle(EnergyOracle::Backend::fem, [state](const ElasticTensor& exterior, const SymMat& sigma) {
    std::lock_guard<std::mutex> lock(state->mutex);
    if (exterior.mandel() != state->current_exterior) {
      state->solver.set_exterior(exterior);
      state->current_exterior = exterior.mandel();
    }
    const std::string wkey(reinterpret_cast<const char*>(sigma.mandel().data()), sizeof(double) * 6);
    const auto warm_it = state->warm.find(wkey);
    const Eigen::VectorXd* warm = warm_it == state->warm.end() ? nullptr : &warm_it->second;
    SolveStats stats;
    DiscreteDisplacement w = state->solver.solve(sigma, &stats, warm);
    const double ep = state->solver.energy_primal(sigma, w);
    const double ef = state->solver.energy_flux(sigma, w);
    append_solve_audit({ep, ef, state->cfg.cg_tol, state->solver.mean_load_energy(sigma),
                        stats.iterations, state->solver.korn_report(w)});
    state->warm[wkey] = std::move(w.raw);
    return ep;
  });
}

double total_energy(const EnergyOracle& oracle, const ElasticTensor& A) {
  double acc = 0.0;
  for (int i = 1; i <= 3; ++i)
    for (int j = i; j <= 3; ++j) acc += oracle(A, canonical_basis(i, j));
  return acc;
}

namespace {

// Golden-section maximum of a concave function on [lo, hi]. Interior values
// below min of the endpoint values signal a unimodality violation.
template <class F>
double concave_line_max(const F& f, double lo, double hi, double tol, double slack,
                        const std::string& slice_name) {
  constexpr double inv_phi = 0.6180339887498949;
  double flo = f(lo), fhi = f(hi);
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  const auto check = [&](double v) {
    const double floor_v = std::min(flo, fhi);
    const double scale = std::max({std::abs(flo), std::abs(fhi), 1.0});
    if (v < floor_v - slack * scale)
      throw std::runtime_error("approx1_iso: non-concave slice detected (" + slice_name + ")");
  };
  check(f1);
  check(f2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      flo = f1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
      check(f2);
    } else {
      b = x2;
      fhi = f2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
      check(f1);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

IsoModuli approx1_iso(const EnergyOracle& oracle, const EllipticityBand& band, const Approx1Options& opts) {
  const double tol = opts.coord_tol_factor * band.beta;
  double kappa = 0.5 * (band.alpha + band.beta);
  double mu = 0.25 * (band.alpha + band.beta);

  const auto total = [&](double k, double m) { return total_energy(oracle, iso_to_full(IsoModuli(k, m))); };

  for (int pass = 0; pass < opts.max_alternations; ++pass) {
    const double kappa_prev = kappa, mu_prev = mu;
    kappa = concave_line_max([&](double k) { return total(k, mu); }, band.alpha, band.beta, tol,
                             opts.concavity_slack, "kappa-slice at mu=" + std::to_string(mu));
    mu = concave_line_max([&](double m) { return total(kappa, m); }, band.alpha / 2.0, band.beta / 2.0, tol,
                          opts.concavity_slack, "mu-slice at kappa=" + std::to_string(kappa));
    if (std::abs(kappa - kappa_prev) < tol && std::abs(mu - mu_prev) < tol) break;
  }
  return IsoModuli(kappa, mu);
}

Approx2Result approx2(const VoxelField& field, const ElasticTensor& A1, const SolverConfig& cfg) {
  EmbeddedSolver solver(field, A1, cfg);
  Mat6 m;
  for (int c = 0; c < 6; ++c) {
    const SymMat sigma = mandel_unit(c);
    SolveStats stats;
    const DiscreteDisplacement w = solver.solve(sigma, &stats);
    const double ep = solver.energy_primal(sigma, w);
    const double ef = solver.energy_flux(sigma, w);
    append_solve_audit({ep, ef, cfg.cg_tol, solver.mean_load_energy(sigma), stats.iterations,
                        solver.korn_report(w)});
    m.col(c) = solver.flux_average(sigma, w).mandel();
  }
  const double asym = (m - m.transpose()).norm() / std::max(m.norm(), 1e-300);
  return {ElasticTensor(0.5 * (m + m.transpose())), asym};
}

ElasticTensor approx3(const EnergyOracle& oracle, const ElasticTensor& A1) {
  Mat6 m = Mat6::Zero();
  double diag[6];
  for (int k = 0; k < 6; ++k) {
    diag[k] = oracle(A1, mandel_unit(k));
    m(k, k) = diag[k];
  }
  for (int k = 0; k < 6; ++k)
    for (int l = k + 1; l < 6; ++l) {
      const double both = oracle(A1, mandel_unit(k) + mandel_unit(l));
      m(k, l) = m(l, k) = 0.5 * (both - diag[k] - diag[l]);
    }
  return ElasticTensor(m);
}

double F_eval(const EnergyOracle& oracle, double mu, double kappa) {
  const ElasticTensor a = iso_to_full(IsoModuli(kappa, mu));
  double acc = 0.0;
  for (int i = 1; i <= 3; ++i)
    for (int j = i + 1; j <= 3; ++j) acc += oracle(a, canonical_basis(i, j));
  return acc / 3.0 - mu;
}

double G_eval(const EnergyOracle& oracle, double mu, double kappa) {
  const ElasticTensor a = iso_to_full(IsoModuli(kappa, mu));
  return oracle(a, SymMat::identity()) / 3.0 - kappa;
}

namespace {

// Bisection for a function with f(lo) >= 0 >= f(hi); the sign layout is
// guaranteed by the comparison bounds when the oracle's field lies in the
// band.
template <class F>
double bisect_root(const F& f, double lo, double hi, double tol, const std::string& what) {
  double flo = f(lo), fhi = f(hi);
  const double noise = 1e-9 * (std::abs(flo) + std::abs(fhi) + 1.0);
  if (flo < -noise || fhi > noise)
    throw std::runtime_error("approx4_selfconsistent: no sign change in the " + what +
                             " bracket (oracle outside the comparison bounds)");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::pair<IsoModuli, FixedPointTrace> approx4_selfconsistent(const EnergyOracle& oracle,
                                                             const EllipticityBand& band,
                                                             const FixedPointOptions& opts) {
  FixedPointTrace trace;
  trace.tol = opts.tol;

  double mu = opts.initial ? opts.initial->mu : 0.25 * (band.alpha + band.beta);
  double kappa = opts.initial ? opts.initial->kappa : 0.5 * (band.alpha + band.beta);

  double res_prev = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    const double mu_hat = bisect_root([&](double m) { return F_eval(oracle, m, kappa); }, band.alpha / 2.0,
                                      band.beta / 2.0, opts.bisect_tol, "mu");
    const double kappa_hat = bisect_root([&](double k) { return G_eval(oracle, mu, k); }, band.alpha,
                                         band.beta, opts.bisect_tol, "kappa");

    double mu_next = mu_hat, kappa_next = kappa_hat;
    double fr = std::abs(F_eval(oracle, mu_next, kappa_next));
    double gr = std::abs(G_eval(oracle, mu_next, kappa_next));
    if (std::max(fr, gr) > res_prev) {
      // stalled: damp the step and re-measure
      mu_next = 0.5 * (mu + mu_hat);
      kappa_next = 0.5 * (kappa + kappa_hat);
      fr = std::abs(F_eval(oracle, mu_next, kappa_next));
      gr = std::abs(G_eval(oracle, mu_next, kappa_next));
    }
    mu = mu_next;
    kappa = kappa_next;
    res_prev = std::max(fr, gr);
    trace.iterates.push_back({kappa, mu, fr, gr});
    if (res_prev <= opts.tol) {
      trace.converged = true;
      return {IsoModuli(kappa, mu), trace};
    }
  }
  throw FixedPointError("approx4_selfconsistent: outer iteration did not converge in " +
                            std::to_string(opts.max_outer) + " steps",
                        trace);
}

}  // namespace homog
