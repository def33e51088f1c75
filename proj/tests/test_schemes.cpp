#include <doctest.h>

#include <random>

#include "homog/eshelby.hpp"
#include "homog/microstructure.hpp"
#include "homog/schemes.hpp"

using namespace homog;

namespace {

SymMat random_symmat(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat3 a;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) a(i, j) = a(j, i) = u(rng);
  return SymMat::from_matrix(a);
}

}  // namespace

TEST_CASE("total energy of a constant field at the field value") {
  const IsoModuli m(2.0, 0.8);
  const EnergyOracle oracle = make_eshelby_oracle(m);
  const ElasticTensor A = iso_to_full(m);
  // all correctors vanish: sum of sigma^ij . A sigma^ij over i <= j
  double expected = 0.0;
  for (int i = 1; i <= 3; ++i)
    for (int j = i; j <= 3; ++j) expected += energy_quadratic(A, canonical_basis(i, j));
  CHECK(total_energy(oracle, A) == doctest::Approx(expected).epsilon(1e-13));
  // closed-form split: 3 shear loads contribute mu each, 3 diagonal loads 2mu0+lambda0
  CHECK(expected == doctest::Approx(3.0 * m.mu + 3.0 * (2.0 * m.mu + m.lambda())));
}

TEST_CASE("total energy for distinct exterior uses the closed forms") {
  const IsoModuli inc(2.0, 0.8), ext(3.0, 1.2);
  const EnergyOracle oracle = make_eshelby_oracle(inc);
  const double expected = 3.0 * energy_shear_closed(inc, ext) + 3.0 * energy_diag_closed(inc, ext);
  CHECK(total_energy(oracle, iso_to_full(ext)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("eshelby oracle rejects anisotropic exteriors and memoizes") {
  const EnergyOracle oracle = make_eshelby_oracle(IsoModuli(2.0, 0.8));
  Mat6 bad = iso_to_full(IsoModuli(2.0, 0.8)).mandel();
  bad(0, 1) += 0.2;
  bad(1, 0) += 0.2;
  CHECK_THROWS_AS(oracle(ElasticTensor(bad), SymMat::identity()), std::invalid_argument);

  const ElasticTensor good = iso_to_full(IsoModuli(2.5, 1.0));
  const double v1 = oracle(good, SymMat::identity());
  const double v2 = oracle(good, SymMat::identity());
  CHECK(v1 == v2);
}

TEST_CASE("energy concavity along segments (analytic oracle)") {
  const IsoModuli inc(2.0, 0.8);
  const EnergyOracle oracle = make_eshelby_oracle(inc);
  const ElasticTensor A0 = iso_to_full(IsoModuli(1.2, 0.5));
  const ElasticTensor A1 = iso_to_full(IsoModuli(3.5, 1.7));
  std::mt19937_64 rng(40);
  for (const double t : {0.25, 0.5, 0.75}) {
    const SymMat sigma = random_symmat(rng);
    const ElasticTensor At((1 - t) * A0.mandel() + t * A1.mandel());
    const double mid = oracle(At, sigma);
    const double chord = (1 - t) * oracle(A0, sigma) + t * oracle(A1, sigma);
    CHECK(mid >= chord - 1e-12);
  }
  // and for the summed form
  for (const double t : {0.25, 0.5, 0.75}) {
    const ElasticTensor At((1 - t) * A0.mandel() + t * A1.mandel());
    CHECK(total_energy(oracle, At) >=
          (1 - t) * total_energy(oracle, A0) + t * total_energy(oracle, A1) - 1e-12);
  }
}

TEST_CASE("approx1 finds the inclusion moduli for a constant field") {
  const IsoModuli m(2.0, 0.75);
  const EllipticityBand band(1.0, 4.0);
  const EnergyOracle oracle = make_eshelby_oracle(m);
  Approx1Options opts;
  opts.coord_tol_factor = 1e-7;
  const IsoModuli a1 = approx1_iso(oracle, band, opts);
  CHECK(a1.kappa == doctest::Approx(m.kappa).epsilon(1e-6));
  CHECK(a1.mu == doctest::Approx(m.mu).epsilon(1e-6));
}

TEST_CASE("approx1 out-of-band maximizer clamps to the boundary") {
  // inclusion below the band: the concave objective is maximized at the
  // band edge, which the bracket search returns
  const IsoModuli m(1.05, 0.52);
  const EllipticityBand band(1.5, 4.0);
  const EnergyOracle oracle = make_eshelby_oracle(m);
  const IsoModuli a1 = approx1_iso(oracle, band);
  CHECK(a1.kappa == doctest::Approx(band.alpha).epsilon(1e-4));
  CHECK(a1.mu == doctest::Approx(band.alpha / 2.0).epsilon(1e-4));
}

TEST_CASE("approx3 reconstructs the tensor of a constant field") {
  const IsoModuli m(2.4, 1.1);
  const EnergyOracle oracle = make_eshelby_oracle(m);
  const ElasticTensor a3 = approx3(oracle, iso_to_full(m));
  CHECK((a3.mandel() - iso_to_full(m).mandel()).norm() < 1e-12);
}

TEST_CASE("approx3 satisfies the quadratic-form definition on held-out loads") {
  const IsoModuli inc(2.0, 0.8);
  const IsoModuli ext(2.8, 1.3);
  const EnergyOracle oracle = make_eshelby_oracle(inc);
  const ElasticTensor a3 = approx3(oracle, iso_to_full(ext));
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 10; ++rep) {
    const SymMat s = random_symmat(rng);
    CHECK(energy_quadratic(a3, s) == doctest::Approx(oracle(iso_to_full(ext), s)).epsilon(1e-10));
  }
  // isotropic structure: shear eigenvalue 2 E_{s12}, bulk eigenvalue E_Id/3
  const IsoModuli proj = iso_projection(a3);
  CHECK(proj.mu == doctest::Approx(oracle(iso_to_full(ext), canonical_basis(1, 2))).epsilon(1e-10));
  CHECK(proj.kappa == doctest::Approx(oracle(iso_to_full(ext), SymMat::identity()) / 3.0).epsilon(1e-10));
  CHECK(is_isotropic(a3, 1e-9));
}

TEST_CASE("F and G vanish at the moduli of a constant field") {
  const IsoModuli m(2.6, 0.9);
  const EnergyOracle oracle = make_eshelby_oracle(m);
  CHECK(F_eval(oracle, m.mu, m.kappa) == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(G_eval(oracle, m.mu, m.kappa) == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("F and G closed forms for the band-extremal field") {
  const double alpha = 1.0;
  const EnergyOracle oracle = make_eshelby_oracle(IsoModuli(alpha, alpha / 2.0));  // A_underline
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.6, 3.5);
  for (int rep = 0; rep < 10; ++rep) {
    const double kappa = u(rng), mu = 0.5 * u(rng);
    const double F_closed =
        (alpha / 2.0 - mu) *
        (1.0 - 2.0 * (alpha / 2.0 - mu) / (alpha + (8.0 * mu + 3.0 * kappa) / (6.0 * mu + kappa) * mu));
    const double G_closed = (alpha - kappa) * (1.0 - (alpha - kappa) / (alpha + 4.0 * mu));
    CHECK(F_eval(oracle, mu, kappa) == doctest::Approx(F_closed).epsilon(1e-12));
    CHECK(G_eval(oracle, mu, kappa) == doctest::Approx(G_closed).epsilon(1e-12));
  }
}

TEST_CASE("comparison bounds: F and G of a mid-band field sit between the extremal closed forms") {
  // FEM oracle on a two-phase field, checked against the closed forms of
  // A_underline and A_overline at a few band points.
  const EllipticityBand band(1.0, 4.0);
  GeneratorSpec spec;
  spec.kind = GeneratorKind::two_phase_voxel;
  spec.n = 4;
  spec.seed = 17;
  spec.phase1 = IsoModuli(1.3, 0.65);
  spec.phase2 = IsoModuli(3.6, 1.8);
  spec.volume_fraction = 0.5;
  spec.band = band;
  const VoxelField field = generate(spec);
  SolverConfig cfg;
  cfg.L = 2.0;
  cfg.nx = 8;
  cfg.cg_tol = 1e-8;
  const EnergyOracle fem = make_fem_oracle(field, cfg);
  const EnergyOracle lower = make_eshelby_oracle(IsoModuli(band.alpha, band.alpha / 2.0));
  const EnergyOracle upper = make_eshelby_oracle(IsoModuli(band.beta, band.beta / 2.0));

  for (const auto& [mu, kappa] : {std::pair{0.8, 1.6}, {1.1, 2.4}, {1.6, 3.2}}) {
    const double f = F_eval(fem, mu, kappa);
    CHECK(f >= F_eval(lower, mu, kappa) - 1e-8);
    CHECK(f <= F_eval(upper, mu, kappa) + 1e-8);
    const double g = G_eval(fem, mu, kappa);
    CHECK(g >= G_eval(lower, mu, kappa) - 1e-8);
    CHECK(g <= G_eval(upper, mu, kappa) + 1e-8);
  }
}

TEST_CASE("approx4 on a constant field converges immediately to the field moduli") {
  const IsoModuli m(2.2, 0.95);
  const EllipticityBand band(1.0, 4.0);
  const EnergyOracle oracle = make_eshelby_oracle(m);
  const auto [a4, trace] = approx4_selfconsistent(oracle, band);
  CHECK(trace.converged);
  CHECK(trace.iterates.size() <= 3);
  CHECK(a4.kappa == doctest::Approx(m.kappa).epsilon(1e-7));
  CHECK(a4.mu == doctest::Approx(m.mu).epsilon(1e-7));
  CHECK(trace.tol == doctest::Approx(1e-6));
  // bounds from the proof: the fixed point lies in the closed band box
  CHECK(a4.kappa >= band.alpha);
  CHECK(a4.kappa <= band.beta);
  CHECK(2.0 * a4.mu >= band.alpha);
  CHECK(2.0 * a4.mu <= band.beta);
}

TEST_CASE("approx1 on a two-phase FEM field stays inside the band box") {
  const EllipticityBand band(1.0, 4.0);
  GeneratorSpec spec;
  spec.kind = GeneratorKind::two_phase_voxel;
  spec.n = 4;
  spec.seed = 23;
  spec.phase1 = IsoModuli(1.3, 0.65);
  spec.phase2 = IsoModuli(3.6, 1.8);
  spec.volume_fraction = 0.5;
  spec.band = band;
  const VoxelField field = generate(spec);
  SolverConfig cfg;
  cfg.L = 2.0;
  cfg.nx = 8;
  cfg.cg_tol = 1e-7;
  const EnergyOracle oracle = make_fem_oracle(field, cfg);
  Approx1Options opts;
  opts.coord_tol_factor = 5e-3;
  const IsoModuli a1 = approx1_iso(oracle, band, opts);
  CHECK(a1.kappa >= band.alpha);
  CHECK(a1.kappa <= band.beta);
  CHECK(2.0 * a1.mu >= band.alpha);
  CHECK(2.0 * a1.mu <= band.beta);
  // and between the phases, since the field is
  CHECK(a1.kappa >= spec.phase1.kappa);
  CHECK(a1.kappa <= spec.phase2->kappa);
  CHECK(a1.mu >= spec.phase1.mu);
  CHECK(a1.mu <= spec.phase2->mu);
}

TEST_CASE("approx1 reports a non-concave slice as a diagnostic error") {
  // a convex objective in kappa: interior bracket values drop below the
  // endpoint floor and the search flags the slice
  const EnergyOracle convex(EnergyOracle::Backend::closed_form_eshelby,
                            [](const ElasticTensor& A, const SymMat&) {
                              const double k = iso_projection(A).kappa;
                              return (k - 2.0) * (k - 2.0);
                            });
  const EllipticityBand band(1.0, 4.0);
  CHECK_THROWS_WITH_AS(approx1_iso(convex, band), doctest::Contains("non-concave"),
                       std::runtime_error);
}

TEST_CASE("approx4 bracket failure names the oracle problem") {
  // an oracle whose F never changes sign on the bracket: constant energy
  const EnergyOracle broken(EnergyOracle::Backend::closed_form_eshelby,
                            [](const ElasticTensor&, const SymMat&) { return 100.0; });
  const EllipticityBand band(1.0, 4.0);
  CHECK_THROWS_WITH_AS(approx4_selfconsistent(broken, band),
                       doctest::Contains("comparison bounds"), std::runtime_error);
}

TEST_CASE("approx2 on a constant field returns the field tensor") {
  const IsoModuli m(2.0, 0.9);
  const EllipticityBand band(1.0, 4.0);
  const VoxelField field = VoxelField::constant(4, band, iso_to_full(m));
  SolverConfig cfg;
  cfg.L = 2.0;
  cfg.nx = 8;
  cfg.cg_tol = 1e-10;
  const Approx2Result a2 = approx2(field, iso_to_full(m), cfg);
  CHECK((a2.tensor.mandel() - iso_to_full(m).mandel()).norm() < 1e-10);
  CHECK(a2.asymmetry_rel < 1e-12);
}

TEST_CASE("approx2 columns match the closed-form Eshelby flux") {
  const IsoModuli inc = IsoModuli::from_lame(1.0, 1.0);
  const IsoModuli ext = IsoModuli::from_lame(1.0, 2.0);
  const EllipticityBand band(1.5, 8.0);
  const VoxelField field = VoxelField::constant(8, band, iso_to_full(inc));
  SolverConfig cfg;
  cfg.L = 2.0;
  cfg.nx = 16;
  cfg.cg_tol = 1e-9;
  const Approx2Result a2 = approx2(field, iso_to_full(ext), cfg);
  CHECK(a2.asymmetry_rel < 1e-6);
  // exact flux: A0 (sigma + C_sigma)
  const SymMat sigma = canonical_basis(1, 2);
  const SymMat C = interior_matrix({inc, ext, sigma});
  const SymMat expected = apply(iso_to_full(inc), sigma + C);
  const SymMat got = apply(a2.tensor, sigma);
  CHECK((got.mandel() - expected.mandel()).norm() / expected.norm() < 0.15);  // coarse mesh
}

TEST_CASE("fem-backed schemes on a constant field reproduce it (identity case)") {
  const IsoModuli m(2.0, 0.75);
  const EllipticityBand band(1.0, 4.0);
  const VoxelField field = VoxelField::constant(4, band, iso_to_full(m));
  SolverConfig cfg;
  cfg.L = 2.0;
  cfg.nx = 8;
  cfg.cg_tol = 1e-9;
  const EnergyOracle oracle = make_fem_oracle(field, cfg);

  Approx1Options opts;
  opts.coord_tol_factor = 1e-4;
  const IsoModuli a1 = approx1_iso(oracle, band, opts);
  CHECK(a1.kappa == doctest::Approx(m.kappa).epsilon(1e-3));
  CHECK(a1.mu == doctest::Approx(m.mu).epsilon(1e-3));

  const ElasticTensor a3 = approx3(oracle, iso_to_full(m));
  CHECK((a3.mandel() - iso_to_full(m).mandel()).norm() / iso_to_full(m).mandel().norm() < 1e-6);

  FixedPointOptions fp;
  fp.tol = 1e-6;
  fp.bisect_tol = 1e-7;
  const auto [a4, trace] = approx4_selfconsistent(oracle, band, fp);
  CHECK(a4.kappa == doctest::Approx(m.kappa).epsilon(1e-5));
  CHECK(a4.mu == doctest::Approx(m.mu).epsilon(1e-5));
}

TEST_CASE("solve audit records primal/flux agreement") {
  clear_solve_audit_log();
  const IsoModuli m(2.0, 0.75);
  const EllipticityBand band(1.0, 4.0);
  const VoxelField field = VoxelField::constant(4, band, iso_to_full(m));
  SolverConfig cfg;
  cfg.L = 2.0;
  cfg.nx = 8;
  cfg.cg_tol = 1e-9;
  const EnergyOracle oracle = make_fem_oracle(field, cfg);
  oracle(iso_to_full(IsoModuli(2.5, 1.0)), canonical_basis(1, 2));
  const auto& log = solve_audit_log();
  REQUIRE(!log.empty());
  for (const auto& a : log) {
    CHECK(std::abs(a.energy_primal - a.energy_flux) <= 10.0 * a.cg_tol * a.scale);
    // minimization form: the corrector can only lower the zero-trial value
    CHECK(a.energy_primal <= a.scale * (1.0 + 1e-12));
  }
  clear_solve_audit_log();
}
