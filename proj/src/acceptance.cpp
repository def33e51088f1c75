#include "homog/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "homog/concavity.hpp"
#include "homog/eshelby.hpp"
#include "homog/layer_potentials.hpp"
#include "homog/microstructure.hpp"
#include "homog/schemes.hpp"

#include <json.hpp>

namespace homog {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Deterministic moduli samples; mt19937_64 keeps the suite reproducible.
IsoModuli random_moduli(std::mt19937_64& rng, double lo = 0.4, double hi = 4.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  return IsoModuli(u(rng), 0.5 * u(rng));
}

SymMat random_symmat(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat3 a;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) a(i, j) = a(j, i) = u(rng);
  return SymMat::from_matrix(a);
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v(g(rng), g(rng), g(rng));
  while (v.norm() < 1e-3) v = Vec3(g(rng), g(rng), g(rng));
  return v.normalized();
}

// Closed-form flux tensor of a constant-inclusion field:
// A2 sigma = A0 (sigma + C_sigma), exact because e(w) = C inside the ball.
ElasticTensor eshelby_flux_tensor(const IsoModuli& inclusion, const IsoModuli& exterior) {
  const ElasticTensor a0 = iso_to_full(inclusion);
  Mat6 m;
  for (int c = 0; c < 6; ++c) {
    Vec6 unit = Vec6::Zero();
    unit[c] = 1.0;
    const SymMat sigma = SymMat::from_mandel(unit);
    const SymMat C = interior_matrix({inclusion, exterior, sigma});
    m.col(c) = a0.apply(sigma + C).mandel();
  }
  return ElasticTensor(0.5 * (m + m.transpose()));
}

double rel_err(double value, double ref) { return std::abs(value - ref) / std::abs(ref); }

// --------------------------------------------------------------------------

CriterionResult criterion1_layer_spectrum() {
  CriterionResult r{1, "layer-potential spectrum (special-field eigenvalues)"};
  const auto t0 = Clock::now();
  const IsoModuli m = IsoModuli::from_lame(1.0, 1.0);
  const SphereQuadrature quad = SphereQuadrature::default_rule();
  std::mt19937_64 rng(11);

  struct Case {
    BoundaryField field;
    double eigenvalue;
  };
  std::vector<Case> cases;
  cases.push_back({field_z0(), 1.0 / 9.0});
  for (int i = 1; i <= 3; ++i)
    for (int j = i + 1; j <= 3; ++j) cases.push_back({field_zij(i, j), 1.0 / 3.0});
  for (int i = 1; i <= 3; ++i)
    for (int j = i + 1; j <= 3; ++j) cases.push_back({field_rij(i, j), 11.0 / 45.0});
  for (int i = 1; i <= 3; ++i) cases.push_back({field_zi(i), 11.0 / 45.0});

  double max_err = 0.0;
  for (const auto& c : cases) {
    int tested = 0;
    while (tested < 5) {
      const Vec3 x = random_unit(rng);
      const Vec3 fx = c.field(x);
      if (fx.norm() < 0.3) continue;  // avoid near-zero directions of the field
      ++tested;
      const Vec3 vfx = single_layer_apply(m, c.field, quad, x);
      max_err = std::max(max_err, (vfx - c.eigenvalue * fx).norm() / (std::abs(c.eigenvalue) * fx.norm()));
    }
  }
  r.seconds = seconds_since(t0);
  r.passed = max_err <= 1e-6 && r.seconds < 5.0;
  r.detail = "max rel err " + fmt(max_err) + " (tol 1e-6)";
  return r;
}

CriterionResult criterion2_varphi() {
  CriterionResult r{2, "single-layer identity V varphi_C = Cx on the sphere"};
  const auto t0 = Clock::now();
  const SphereQuadrature quad = SphereQuadrature::default_rule();
  std::mt19937_64 rng(22);
  double max_err = 0.0;
  for (int mi = 0; mi < 5; ++mi) {
    const IsoModuli m = random_moduli(rng);
    for (int ci = 0; ci < 10; ++ci) {
      SymMat C = random_symmat(rng);
      C = C * (1.0 / std::max(C.norm(), 1e-6));
      const BoundaryField phi = varphi_density(m, C);
      const Mat3 Cm = C.to_matrix();
      for (int pi = 0; pi < 50; ++pi) {
        const Vec3 x = random_unit(rng);
        const Vec3 v = single_layer_apply(m, phi, quad, x);
        max_err = std::max(max_err, (v - Cm * x).norm());
      }
    }
  }
  r.seconds = seconds_since(t0);
  r.passed = max_err <= 1e-6 && r.seconds < 10.0;
  r.detail = "max |V phi_C - Cx| " + fmt(max_err) + " (tol 1e-6)";
  return r;
}

CriterionResult criterion3_traction_jump() {
  CriterionResult r{3, "Eshelby traction jump identity"};
  const auto t0 = Clock::now();
  std::mt19937_64 rng(33);
  double max_res = 0.0;
  for (int ci = 0; ci < 5; ++ci) {
    const IsoModuli inc = random_moduli(rng);
    const IsoModuli mat = random_moduli(rng);
    for (int k = 1; k <= 3; ++k)
      for (int l = k; l <= 3; ++l) {
        const EshelbyConfig cfg{inc, mat, canonical_basis(k, l)};
        const EshelbySolution sol = solve(cfg);
        for (int pi = 0; pi < 50; ++pi) {
          const Vec3 x = random_unit(rng);
          max_res = std::max(max_res, (traction_jump(cfg, sol, x) - traction_jump_rhs(cfg, x)).norm());
        }
      }
  }
  r.seconds = seconds_since(t0);
  r.passed = max_res <= 1e-12 && r.seconds < 1.0;
  r.detail = "max residual " + fmt(max_res) + " (tol 1e-12)";
  return r;
}

CriterionResult criterion4_energy_triple() {
  CriterionResult r{4, "energy closed-form agreement (general vs shear vs bulk)"};
  const auto t0 = Clock::now();
  std::mt19937_64 rng(44);
  double max_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const IsoModuli inc = random_moduli(rng);
    const IsoModuli mat = random_moduli(rng);
    const double e_shear = energy({inc, mat, canonical_basis(1, 2)});
    max_err = std::max(max_err, rel_err(e_shear, energy_shear_closed(inc, mat)));
    const double e_bulk = energy({inc, mat, SymMat::identity()});
    max_err = std::max(max_err, rel_err(e_bulk, energy_bulk_closed(inc, mat)));
  }
  r.seconds = seconds_since(t0);
  r.passed = max_err <= 1e-12 && r.seconds < 1.0;
  r.detail = "max rel mismatch " + fmt(max_err) + " (tol 1e-12)";
  return r;
}

// Shared Eshelby validation configuration: inclusion (mu0=1, lambda0=1),
// matrix (mu=2, lambda=1), sigma = sigma^12, exact energy 37/56.
struct EshelbyBench {
  IsoModuli inclusion = IsoModuli::from_lame(1.0, 1.0);  // kappa0 = 5
  IsoModuli matrix = IsoModuli::from_lame(1.0, 2.0);     // kappa = 7
  EllipticityBand band{1.5, 8.0};
  double exact = 37.0 / 56.0;
};

CriterionResult criterion5_fem_vs_analytic() {
  CriterionResult r{5, "FEM vs analytic Eshelby energy (L=4, nx=24/32/48)"};
  const auto t0 = Clock::now();
  const EshelbyBench bench;
  const SymMat sigma = canonical_basis(1, 2);
  const ElasticTensor exterior = iso_to_full(bench.matrix);

  std::vector<double> errors;
  std::ostringstream detail;
  double mean_strain_err = 0.0;
  for (const int nx : {24, 32, 48}) {
    SolverConfig cfg;
    cfg.L = 4.0;
    cfg.nx = nx;
    cfg.cg_tol = 1e-8;
    const int n = nx / 4;
    const VoxelField field = VoxelField::constant(n, bench.band, iso_to_full(bench.inclusion));
    EmbeddedSolver solver(field, exterior, cfg);
    SolveStats stats;
    const DiscreteDisplacement w = solver.solve(sigma, &stats);
    const double ep = solver.energy_primal(sigma, w);
    const double ef = solver.energy_flux(sigma, w);
    append_solve_audit({ep, ef, cfg.cg_tol, solver.mean_load_energy(sigma), stats.iterations,
                        solver.korn_report(w)});
    errors.push_back(rel_err(ep, bench.exact));
    detail << "nx=" << nx << " err=" << fmt(errors.back()) << "  ";

    if (nx == 48) {
      // Interior strain of the solve equals C within the same tolerance:
      // recover the ball-average strain from the flux average.
      const SymMat flux = solver.flux_average(sigma, w);
      const ElasticTensor a0 = iso_to_full(bench.inclusion);
      const Vec6 mean_e = a0.mandel().ldlt().solve(flux.mandel()) - sigma.mandel();
      const SymMat C = interior_matrix({bench.inclusion, bench.matrix, sigma});
      mean_strain_err = (mean_e - C.mandel()).norm() / C.norm();
      detail << "strain err=" << fmt(mean_strain_err) << "  ";
    }
  }
  r.seconds = seconds_since(t0);
  const bool monotone = errors[0] >= errors[1] && errors[1] >= errors[2];
  r.passed = errors[2] <= 0.05 && monotone && mean_strain_err <= 0.05 && r.seconds <= 600.0;
  r.detail = detail.str() + (monotone ? "(monotone)" : "(NOT monotone)");
  return r;
}

CriterionResult criterion6_identity_microstructure(bool quick) {
  CriterionResult r{6, "identity microstructure: A1..A4 reproduce the phase"};
  const auto t0 = Clock::now();
  const IsoModuli phase(2.0, 0.75);
  const EllipticityBand band(1.0, 4.0);
  std::ostringstream detail;

  // Analytic oracle.
  double worst_analytic = 0.0;
  {
    const EnergyOracle oracle = make_eshelby_oracle(phase);
    Approx1Options a1opts;
    a1opts.coord_tol_factor = 1e-7;
    const IsoModuli a1 = approx1_iso(oracle, band, a1opts);
    worst_analytic = std::max(rel_err(a1.kappa, phase.kappa), rel_err(a1.mu, phase.mu));

    const ElasticTensor a2 = eshelby_flux_tensor(phase, a1);
    const IsoModuli a2m = iso_projection(a2);
    worst_analytic = std::max({worst_analytic, rel_err(a2m.kappa, phase.kappa), rel_err(a2m.mu, phase.mu)});

    const ElasticTensor a3 = approx3(oracle, iso_to_full(a1));
    const IsoModuli a3m = iso_projection(a3);
    worst_analytic = std::max({worst_analytic, rel_err(a3m.kappa, phase.kappa), rel_err(a3m.mu, phase.mu)});

    const auto [a4, trace] = approx4_selfconsistent(oracle, band);
    worst_analytic = std::max({worst_analytic, rel_err(a4.kappa, phase.kappa), rel_err(a4.mu, phase.mu)});
    detail << "analytic worst rel err " << fmt(worst_analytic) << " (tol 1e-6)";
  }

  double worst_fem = 0.0;
  if (!quick) {
    GeneratorSpec spec;
    spec.kind = GeneratorKind::constant;
    spec.n = 4;
    spec.phase1 = phase;
    spec.band = band;
    const VoxelField field = generate(spec);
    SolverConfig cfg;
    cfg.L = 2.0;
    cfg.nx = 8;
    cfg.cg_tol = 1e-9;
    const EnergyOracle oracle = make_fem_oracle(field, cfg);

    Approx1Options a1opts;
    a1opts.coord_tol_factor = 5e-4;
    a1opts.concavity_slack = 10.0 * cfg.cg_tol;
    const IsoModuli a1 = approx1_iso(oracle, band, a1opts);
    worst_fem = std::max(rel_err(a1.kappa, phase.kappa), rel_err(a1.mu, phase.mu));

    const Approx2Result a2 = approx2(field, iso_to_full(a1), cfg);
    const IsoModuli a2m = iso_projection(a2.tensor);
    worst_fem = std::max({worst_fem, rel_err(a2m.kappa, phase.kappa), rel_err(a2m.mu, phase.mu)});

    const ElasticTensor a3 = approx3(oracle, iso_to_full(a1));
    const IsoModuli a3m = iso_projection(a3);
    worst_fem = std::max({worst_fem, rel_err(a3m.kappa, phase.kappa), rel_err(a3m.mu, phase.mu)});

    FixedPointOptions fp;
    fp.tol = 1e-5;
    fp.bisect_tol = 1e-6;
    const auto [a4, trace] = approx4_selfconsistent(oracle, band, fp);
    worst_fem = std::max({worst_fem, rel_err(a4.kappa, phase.kappa), rel_err(a4.mu, phase.mu)});
    detail << "; fem worst rel err " << fmt(worst_fem) << " (tol 0.02)";
  }

  r.seconds = seconds_since(t0);
  r.passed = worst_analytic <= 1e-6 && (quick || worst_fem <= 0.02);
  r.detail = detail.str();
  return r;
}

CriterionResult criterion7_self_consistent(bool quick) {
  CriterionResult r{7, "self-consistent fixed point (analytic + two-phase FEM)"};
  const auto t0 = Clock::now();
  const EllipticityBand band(1.0, 4.0);
  const IsoModuli phase_a(1.2, 0.6), phase_b(3.8, 1.9);
  std::ostringstream detail;

  bool analytic_ok = false;
  {
    const auto ta = Clock::now();
    const IsoModuli phase(3.0, 1.0);
    const EnergyOracle oracle = make_eshelby_oracle(phase);
    const auto [a4, trace] = approx4_selfconsistent(oracle, band);
    const double analytic_secs = seconds_since(ta);
    analytic_ok = trace.converged && static_cast<int>(trace.iterates.size()) <= 3 &&
                  rel_err(a4.kappa, phase.kappa) <= 1e-6 && rel_err(a4.mu, phase.mu) <= 1e-6 &&
                  analytic_secs < 1.0;
    detail << "analytic outer iters " << trace.iterates.size() << " (<=3), " << fmt(analytic_secs) << " s";
  }

  bool fem_ok = quick;
  if (!quick) {
    GeneratorSpec spec;
    spec.kind = GeneratorKind::two_phase_voxel;
    spec.n = 8;
    spec.seed = 7;
    spec.phase1 = phase_a;
    spec.phase2 = phase_b;
    spec.volume_fraction = 0.5;
    spec.band = band;
    const VoxelField field = generate(spec);
    SolverConfig cfg;
    cfg.L = 2.0;
    cfg.nx = 32;
    cfg.cg_tol = 1e-7;
    const EnergyOracle oracle = make_fem_oracle(field, cfg);
    FixedPointOptions fp;
    fp.tol = 5e-3;
    fp.bisect_tol = 2e-3;
    fp.initial = IsoModuli(0.5 * (phase_a.kappa + phase_b.kappa), 0.5 * (phase_a.mu + phase_b.mu));
    const auto [a4, trace] = approx4_selfconsistent(oracle, band, fp);
    const bool in_band = a4.kappa >= band.alpha && a4.kappa <= band.beta && 2.0 * a4.mu >= band.alpha &&
                         2.0 * a4.mu <= band.beta;
    const bool between = a4.kappa >= phase_a.kappa && a4.kappa <= phase_b.kappa && a4.mu >= phase_a.mu &&
                         a4.mu <= phase_b.mu;
    fem_ok = trace.converged && in_band && between;
    detail << "; fem (kappa4, mu4) = (" << fmt(a4.kappa) << ", " << fmt(a4.mu)
           << ") between phases: " << (between ? "yes" : "NO");
  }

  r.seconds = seconds_since(t0);
  r.passed = analytic_ok && fem_ok && (quick || r.seconds <= 1800.0);
  r.detail = detail.str();
  return r;
}

CriterionResult criterion8_concavity_algebra() {
  CriterionResult r{8, "concavity algebra (discriminant, gamma identity, f'', affine case)"};
  const auto t0 = Clock::now();
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> u(0.1, 10.0);

  double max_id_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double mu0 = u(rng), kappa = u(rng), mu = u(rng);
    const auto [fpp, w] = shear_energy_second_derivative(mu0, kappa, mu);
    (void)fpp;
    const double lhs1 = -w.discriminant;
    const double rhs1 = 640.0 * w.gamma0 * w.gamma0 * w.gamma0 * kappa * kappa;
    max_id_err = std::max(max_id_err, rel_err(lhs1, rhs1));
    const double lhs2 = 3.0 * w.gamma1 * w.gamma2 - 4.0 * w.gamma2 * w.gamma2 - 18.0 * w.gamma0;
    const double rhs2 = 5.0 * kappa * kappa;
    max_id_err = std::max(max_id_err, rel_err(lhs2, rhs2));
  }

  // f'' against central differences of the closed-form f.
  double max_fd_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double mu0 = u(rng), kappa = u(rng), mu = u(rng);
    const auto f = [&](double x) {
      return 2.0 * (x - mu0) * (x - mu0) /
             (2.0 * mu0 + (8.0 * x + 3.0 * kappa) / (6.0 * x + kappa) * x);
    };
    const double h = 1e-4 * std::max(1.0, mu);
    const double fd = (f(mu + h) - 2.0 * f(mu) + f(mu - h)) / (h * h);
    const auto [fpp, w] = shear_energy_second_derivative(mu0, kappa, mu);
    (void)w;
    max_fd_err = std::max(max_fd_err, std::abs(fpp - fd) / std::abs(fpp));
  }

  const double alpha = 1.0, beta = 3.0;
  const AffineCounterexample aff = affine_counterexample(alpha, beta, 11);
  double max_second_diff = 0.0;
  const auto f_closed = [&](double t) { return alpha - (alpha - beta) * (alpha - beta) * (1.0 + t) / (12.0 * alpha); };
  double max_closed_err = 0.0;
  for (size_t i = 0; i < aff.t.size(); ++i)
    max_closed_err = std::max(max_closed_err, std::abs(aff.value[i] - f_closed(aff.t[i])));
  for (size_t i = 1; i + 1 < aff.t.size(); ++i)
    max_second_diff = std::max(max_second_diff,
                               std::abs(aff.value[i - 1] - 2.0 * aff.value[i] + aff.value[i + 1]));

  r.seconds = seconds_since(t0);
  r.passed = max_id_err <= 1e-9 && max_fd_err <= 1e-5 && max_second_diff <= 1e-12 &&
             max_closed_err <= 1e-12 && r.seconds < 5.0;
  r.detail = "identities " + fmt(max_id_err) + ", f'' vs FD " + fmt(max_fd_err) + ", affine " +
             fmt(max_second_diff);
  return r;
}

CriterionResult criterion9_energy_duality(bool quick) {
  CriterionResult r{9, "energy duality |E_primal - E_flux| <= 10 cg_tol scale on every solve"};
  if (quick) {
    r.skipped = true;
    r.detail = "no FEM solves in quick mode";
    return r;
  }
  const auto& log = solve_audit_log();
  double worst = 0.0;
  for (const auto& a : log) {
    if (a.scale <= 0.0) continue;
    worst = std::max(worst, std::abs(a.energy_primal - a.energy_flux) / (a.cg_tol * a.scale));
  }
  r.passed = !log.empty() && worst <= 10.0;
  r.detail = std::to_string(log.size()) + " solves, worst gap/(cg_tol*scale) = " + fmt(worst);
  return r;
}

CriterionResult criterion10_trend(bool quick) {
  CriterionResult r{10, "rescaling trend + periodic reference comparison"};
  if (quick) {
    r.skipped = true;
    r.detail = "FEM-only criterion";
    return r;
  }
  const auto t0 = Clock::now();
  const EllipticityBand band(1.0, 4.0);
  // Base pattern at n=2 so that the pinned nx=32 mesh resolves every
  // rescaled field (N=4 still leaves two elements per voxel per axis).
  GeneratorSpec spec;
  spec.kind = GeneratorKind::two_phase_voxel;
  spec.n = 2;
  spec.seed = 2026;
  spec.phase1 = IsoModuli(1.2, 0.6);
  spec.phase2 = IsoModuli(3.8, 1.9);
  spec.volume_fraction = 0.5;
  spec.band = band;
  const VoxelField base = generate(spec);

  SolverConfig cfg;
  cfg.L = 2.0;
  cfg.nx = 32;
  cfg.cg_tol = 1e-7;

  std::vector<IsoModuli> results;
  std::optional<IsoModuli> seed_pt;
  for (const int N : {1, 2, 4}) {
    const VoxelField field = rescale(base, N);
    const EnergyOracle oracle = make_fem_oracle(field, cfg);
    FixedPointOptions fp;
    fp.tol = 5e-3;
    fp.bisect_tol = 2e-3;
    fp.initial = seed_pt ? seed_pt : std::optional<IsoModuli>(IsoModuli(
                                        0.5 * (spec.phase1.kappa + spec.phase2->kappa),
                                        0.5 * (spec.phase1.mu + spec.phase2->mu)));
    const auto [a4, trace] = approx4_selfconsistent(oracle, band, fp);
    results.push_back(a4);
    seed_pt = a4;
  }

  const auto rel_dist = [](const IsoModuli& a, const IsoModuli& b) {
    return std::max(std::abs(a.kappa - b.kappa) / b.kappa, std::abs(a.mu - b.mu) / b.mu);
  };
  const double d12 = rel_dist(results[0], results[1]);
  const double d24 = rel_dist(results[1], results[2]);
  const bool stabilizes = d24 <= d12 || d24 <= 0.05;

  // Periodic reference on the finest rescaled cell.
  const VoxelField cell = rescale(base, 4);
  const ElasticTensor a_per = periodic_reference_tensor(cell, cfg);
  const ElasticTensor a4_tensor = iso_to_full(results.back());
  const double per_dist = (a_per.mandel() - a4_tensor.mandel()).norm() / a4_tensor.mandel().norm();

  r.seconds = seconds_since(t0);
  r.passed = stabilizes && per_dist <= 0.10 && r.seconds <= 2700.0;
  std::ostringstream detail;
  detail << "d(N1,N2)=" << fmt(d12) << " d(N2,N4)=" << fmt(d24) << " periodic dist=" << fmt(per_dist);
  r.detail = detail.str();
  return r;
}

CriterionResult criterion11_korn(bool quick) {
  CriterionResult r{11, "Korn and rigid-displacement invariants"};
  if (quick) {
    r.skipped = true;
    r.detail = "FEM-only criterion";
    return r;
  }
  const auto t0 = Clock::now();
  const EshelbyBench bench;
  SolverConfig cfg;
  cfg.L = 2.0;
  cfg.nx = 16;
  cfg.cg_tol = 1e-8;
  const VoxelField field = VoxelField::constant(8, bench.band, iso_to_full(bench.inclusion));
  EmbeddedSolver solver(field, iso_to_full(bench.matrix), cfg);
  const SymMat sigma = canonical_basis(1, 2);
  SolveStats stats;
  const DiscreteDisplacement w = solver.solve(sigma, &stats);
  const KornReport rep = solver.korn_report(w);

  // Pointwise at Gauss points (to rounding) and the global H1_0 Korn bound.
  bool pointwise_ok = rep.max_e_excess <= 1e-12 * rep.max_grad && rep.max_div_excess <= 1e-12 * rep.max_grad;
  bool global_ok = rep.e_norm <= rep.grad_norm * (1.0 + 1e-12) &&
                   rep.div_norm <= std::sqrt(3.0) * rep.grad_norm * (1.0 + 1e-12) &&
                   rep.grad_norm <= std::sqrt(2.0) * rep.e_norm * (1.0 + 1e-12);

  // Every audited solve of the suite carries the same pointwise checks.
  double audit_excess = -1e300;
  for (const auto& a : solve_audit_log()) {
    audit_excess = std::max(audit_excess, a.korn.max_e_excess - 1e-12 * a.korn.max_grad);
    audit_excess = std::max(audit_excess, a.korn.max_div_excess - 1e-12 * a.korn.max_grad);
  }

  // Discrete rigid displacement M x + b has zero strain up to round-off.
  Eigen::VectorXd rigid(solver.dof_count());
  Mat3 M;
  M << 0, 0.3, -0.2, -0.3, 0, 0.7, 0.2, -0.7, 0;
  const Vec3 b(0.1, -0.4, 0.25);
  const int np = cfg.nx + 1;
  for (int k = 0; k < np; ++k)
    for (int j = 0; j < np; ++j)
      for (int i = 0; i < np; ++i) {
        const std::int64_t id = i + static_cast<std::int64_t>(np) * (j + static_cast<std::int64_t>(np) * k);
        rigid.segment<3>(3 * id) = M * solver.node_position(i, j, k) + b;
      }
  const double rigid_strain = solver.max_gauss_strain(rigid);
  const double rigid_tol = 1e-11 * M.norm() / solver.mesh().h();
  const bool rigid_ok = rigid_strain <= rigid_tol;

  r.seconds = seconds_since(t0);
  r.passed = pointwise_ok && global_ok && audit_excess <= 0.0 && rigid_ok;
  std::ostringstream detail;
  detail << "pointwise " << (pointwise_ok ? "ok" : "VIOLATED") << ", global " << (global_ok ? "ok" : "VIOLATED")
         << ", audited excess " << fmt(audit_excess) << ", rigid strain " << fmt(rigid_strain);
  r.detail = detail.str();
  return r;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
  clear_solve_audit_log();
  std::vector<CriterionResult> results;
  results.push_back(criterion1_layer_spectrum());
  results.push_back(criterion2_varphi());
  results.push_back(criterion3_traction_jump());
  results.push_back(criterion4_energy_triple());
  if (opts.quick) {
    CriterionResult r5{5, "FEM vs analytic Eshelby energy (L=4, nx=24/32/48)"};
    r5.skipped = true;
    r5.detail = "FEM-only criterion";
    results.push_back(r5);
  } else {
    results.push_back(criterion5_fem_vs_analytic());
  }
  results.push_back(criterion6_identity_microstructure(opts.quick));
  results.push_back(criterion7_self_consistent(opts.quick));
  results.push_back(criterion8_concavity_algebra());
  results.push_back(criterion10_trend(opts.quick));
  results.push_back(criterion11_korn(opts.quick));
  // Criterion 9 reviews the audit of everything above, so it runs last.
  results.push_back(criterion9_energy_duality(opts.quick));
  std::sort(results.begin(), results.end(),
            [](const CriterionResult& a, const CriterionResult& b) { return a.id < b.id; });
  return results;
}

int report_acceptance(const std::vector<CriterionResult>& results, bool json, std::ostream& os) {
  int failures = 0;
  if (json) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& r : results) {
      doc.push_back({{"id", r.id},
                     {"name", r.name},
                     {"status", r.skipped ? "SKIP" : (r.passed ? "PASS" : "FAIL")},
                     {"detail", r.detail},
                     {"seconds", r.seconds}});
      if (!r.skipped && !r.passed) ++failures;
    }
    os << doc.dump(2) << "\n";
  } else {
    for (const auto& r : results) {
      const char* status = r.skipped ? "SKIP" : (r.passed ? "PASS" : "FAIL");
      os << status << " criterion " << r.id << ": " << r.name;
      if (!r.detail.empty()) os << " [" << r.detail << "]";
      os << " (" << fmt(r.seconds) << " s)\n";
      if (!r.skipped && !r.passed) ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace homog
