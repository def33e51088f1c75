#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "homog/embedded_fem.hpp"
#include "homog/eshelby.hpp"

using namespace homog;

namespace {

const EllipticityBand kBand(1.0, 8.0);

VoxelField constant_field(int n, const IsoModuli& m) {
  return VoxelField::constant(n, kBand, iso_to_full(m));
}

SolverConfig small_cfg() {
  SolverConfig cfg;
  cfg.L = 2.0;
  cfg.nx = 16;
  cfg.cg_tol = 1e-9;
  return cfg;
}

}  // namespace

TEST_CASE("voxel field invariants and geometry") {
  CHECK_THROWS_AS(VoxelField(2, kBand, std::vector<ElasticTensor>(7)), std::invalid_argument);
  CHECK_THROWS_AS(VoxelField::constant(2, kBand, iso_to_full(IsoModuli(20.0, 1.0))), std::domain_error);

  const VoxelField f = constant_field(4, IsoModuli(2.0, 1.0));
  CHECK(f.in_ball(1, 1, 1));       // center (-0.25,-0.25,-0.25)
  CHECK_FALSE(f.in_ball(0, 0, 0)); // center (-0.75,-0.75,-0.75), norm > 1
  CHECK((f.voxel_center(2, 2, 2) - Vec3(0.25, 0.25, 0.25)).norm() < 1e-15);
}

TEST_CASE("voxel field binary round trip with provenance sidecar") {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(1.0, 3.9);
  const int n = 3;
  std::vector<ElasticTensor> cells;
  for (int v = 0; v < n * n * n; ++v) cells.push_back(iso_to_full(IsoModuli(u(rng), u(rng) / 2.0)));
  const VoxelField field(n, EllipticityBand(1.0, 4.0), cells);

  const std::string path = "/tmp/test_field.voxf";
  save_voxel_field(path, field, {"unit_test", 99, "round trip"});
  const VoxelField back = load_voxel_field(path);
  CHECK(back.n() == n);
  CHECK(back.band().alpha == field.band().alpha);
  CHECK(back.band().beta_plus == field.band().beta_plus);
  for (int v = 0; v < n * n * n; ++v)
    CHECK((back.cells()[v].mandel() - field.cells()[v].mandel()).norm() == 0.0);

  const FieldProvenance prov = load_field_provenance(path);
  CHECK(prov.generator == "unit_test");
  CHECK(prov.seed == 99);
  std::remove(path.c_str());
  std::remove((path + ".txt").c_str());

  CHECK_THROWS_AS(load_voxel_field("/nonexistent/field.voxf"), std::runtime_error);
  const std::string bad = "/tmp/test_bad_magic.voxf";
  {
    std::ofstream os(bad, std::ios::binary);
    os << "NOPE this is not a field container";
  }
  CHECK_THROWS_WITH_AS(load_voxel_field(bad), doctest::Contains("magic"), std::runtime_error);
  std::remove(bad.c_str());
}

TEST_CASE("mesh validation") {
  CHECK_THROWS_AS(TruncatedBoxMesh(1.5, 16), std::invalid_argument);
  CHECK_THROWS_AS(TruncatedBoxMesh(2.0, 15), std::invalid_argument);
  const TruncatedBoxMesh mesh(2.0, 16);
  CHECK(mesh.h() == doctest::Approx(0.25));

  // nx must resolve the voxel grid: n=8, L=2 needs nx a multiple of 16
  const VoxelField f = constant_field(8, IsoModuli(2.0, 1.0));
  SolverConfig cfg = small_cfg();
  cfg.nx = 24;
  CHECK_THROWS_AS(EmbeddedSolver(f, iso_to_full(IsoModuli(2.0, 1.0)), cfg), std::invalid_argument);
}

TEST_CASE("exterior tensor must satisfy the extended band") {
  const VoxelField f = constant_field(8, IsoModuli(2.0, 1.0));
  CHECK_THROWS_AS(EmbeddedSolver(f, iso_to_full(IsoModuli(100.0, 1.0)), small_cfg()), std::domain_error);
}

TEST_CASE("constant field equal to the exterior gives a zero corrector") {
  const IsoModuli m(3.0, 1.2);
  const VoxelField f = constant_field(8, m);
  SolveStats stats;
  const DiscreteDisplacement w = solve_embedded(f, iso_to_full(m), canonical_basis(1, 2), small_cfg(), &stats);
  CHECK(w.raw.norm() == 0.0);
  CHECK(stats.iterations == 0);
}

TEST_CASE("zero loading returns the zero solution") {
  const VoxelField f = constant_field(8, IsoModuli(3.0, 1.2));
  const DiscreteDisplacement w =
      solve_embedded(f, iso_to_full(IsoModuli(2.0, 0.8)), SymMat::zero(), small_cfg());
  CHECK(w.raw.norm() == 0.0);
}

TEST_CASE("energies of the trivial solve match the quadratic form") {
  const IsoModuli m(3.0, 1.2);
  const VoxelField f = constant_field(8, m);
  EmbeddedSolver solver(f, iso_to_full(m), small_cfg());
  const DiscreteDisplacement w = solver.solve(SymMat::identity());
  CHECK(solver.energy_primal(SymMat::identity(), w) == doctest::Approx(3.0 * m.kappa).epsilon(1e-12));
  CHECK(solver.energy_flux(SymMat::identity(), w) == doctest::Approx(3.0 * m.kappa).epsilon(1e-12));
  const SymMat flux = solver.flux_average(SymMat::identity(), w);
  CHECK((flux.mandel() - apply(iso_to_full(m), SymMat::identity()).mandel()).norm() < 1e-12);
}

TEST_CASE("coarse Eshelby solve approaches the closed-form energy and strain") {
  // inclusion (mu0=1, l0=1), matrix (mu=2, l=1), sigma = sigma^12
  const IsoModuli inc = IsoModuli::from_lame(1.0, 1.0), mat = IsoModuli::from_lame(1.0, 2.0);
  const VoxelField f = constant_field(8, inc);
  SolverConfig cfg = small_cfg();
  const SymMat sigma = canonical_basis(1, 2);
  EmbeddedSolver solver(f, iso_to_full(mat), cfg);
  SolveStats stats;
  const DiscreteDisplacement w = solver.solve(sigma, &stats);

  const double exact = 37.0 / 56.0;
  const double ep = solver.energy_primal(sigma, w);
  CHECK(std::abs(ep - exact) / exact < 0.15);  // coarse mesh, loose bound

  // primal/flux agreement at the solver tolerance
  const double ef = solver.energy_flux(sigma, w);
  CHECK(std::abs(ep - ef) <= 10.0 * cfg.cg_tol * solver.mean_load_energy(sigma));

  // mean interior strain vs the closed-form C (truncation-dominated at L=2)
  const SymMat flux = solver.flux_average(sigma, w);
  const Vec6 mean_e = iso_to_full(inc).mandel().ldlt().solve(flux.mandel()) - sigma.mandel();
  const SymMat C = interior_matrix({inc, mat, sigma});
  CHECK((mean_e - C.mandel()).norm() / C.norm() < 0.25);

  // residual after the solve obeys the configured tolerance
  CHECK(stats.rel_residual <= cfg.cg_tol);
}

TEST_CASE("solution is linear in sigma") {
  const IsoModuli inc(2.0, 0.6), mat(3.0, 1.0);
  const VoxelField f = constant_field(4, inc);
  SolverConfig cfg = small_cfg();
  cfg.nx = 8;
  EmbeddedSolver solver(f, iso_to_full(mat), cfg);
  const SymMat s1 = canonical_basis(1, 2), s2 = canonical_basis(1, 1);
  const DiscreteDisplacement w1 = solver.solve(s1);
  const DiscreteDisplacement w2 = solver.solve(s2);
  const DiscreteDisplacement w12 = solver.solve(s1 * 2.0 + s2 * (-1.0));
  const double scale = std::max(w12.raw.norm(), 1e-300);
  CHECK((w12.raw - 2.0 * w1.raw + w2.raw).norm() / scale < 1e-6);
}

TEST_CASE("discrete ellipticity sandwich for the corrector strain energy") {
  // alpha ||e||^2 <= integral e . A e <= beta ||e||^2 holds element-wise.
  const IsoModuli inc(2.0, 0.6), mat(3.0, 1.5);
  const VoxelField f = constant_field(4, inc);
  SolverConfig cfg = small_cfg();
  cfg.nx = 8;
  EmbeddedSolver solver(f, iso_to_full(mat), cfg);
  const SymMat sigma = canonical_basis(1, 3);
  const DiscreteDisplacement w = solver.solve(sigma);
  const KornReport rep = solver.korn_report(w);
  // through the energies: corrector energy = S - |B| ep, with S the load term
  const double corr =
      (solver.mean_load_energy(sigma) - solver.energy_primal(sigma, w)) * solver.ball_volume();
  CHECK(corr >= kBand.alpha * rep.e_norm * rep.e_norm * (1.0 - 1e-9));
  CHECK(corr <= kBand.beta * rep.e_norm * rep.e_norm * (1.0 + 1e-9));
}

TEST_CASE("Korn inequalities on a discrete solution") {
  const IsoModuli inc(2.0, 0.6), mat(3.0, 1.5);
  const VoxelField f = constant_field(8, inc);
  EmbeddedSolver solver(f, iso_to_full(mat), small_cfg());
  const DiscreteDisplacement w = solver.solve(canonical_basis(1, 2));
  const KornReport rep = solver.korn_report(w);
  CHECK(rep.max_e_excess <= 1e-12 * rep.max_grad);
  CHECK(rep.max_div_excess <= 1e-12 * rep.max_grad);
  CHECK(rep.e_norm <= rep.grad_norm * (1 + 1e-12));
  CHECK(rep.grad_norm <= std::sqrt(2.0) * rep.e_norm * (1 + 1e-12));  // H1_0 Korn
  CHECK(rep.div_norm <= std::sqrt(3.0) * rep.grad_norm * (1 + 1e-12));
}

TEST_CASE("rigid nodal field has zero discrete strain") {
  const VoxelField f = constant_field(8, IsoModuli(2.0, 1.0));
  EmbeddedSolver solver(f, iso_to_full(IsoModuli(2.0, 1.0)), small_cfg());
  Mat3 M;
  M << 0, 1, -2, -1, 0, 0.5, 2, -0.5, 0;
  const Vec3 b(3.0, -1.0, 0.2);
  Eigen::VectorXd rigid(solver.dof_count());
  const int np = solver.mesh().nodes_per_axis();
  for (int k = 0; k < np; ++k)
    for (int j = 0; j < np; ++j)
      for (int i = 0; i < np; ++i) {
        const std::int64_t id = i + static_cast<std::int64_t>(np) * (j + static_cast<std::int64_t>(np) * k);
        rigid.segment<3>(3 * id) = M * solver.node_position(i, j, k) + b;
      }
  CHECK(solver.max_gauss_strain(rigid) < 1e-11 * M.norm() / solver.mesh().h());
}

TEST_CASE("zero-mean gauge: reported displacement has zero ball mean, raw is zero on the boundary") {
  const IsoModuli inc(2.0, 0.6), mat(3.0, 1.5);
  const VoxelField f = constant_field(4, inc);
  SolverConfig cfg = small_cfg();
  cfg.nx = 8;
  EmbeddedSolver solver(f, iso_to_full(mat), cfg);
  const DiscreteDisplacement w = solver.solve(canonical_basis(1, 1));
  const int np = w.nodes_per_axis;
  // boundary raw values vanish
  for (int i = 0; i < np; ++i) {
    const std::int64_t id = i;  // k = j = 0 face
    CHECK(w.raw.segment<3>(3 * id).norm() == 0.0);
  }
  // the shift is exactly the ball mean of the raw field; value() subtracts it
  CHECK((w.value(0, 0, 0) + w.mean_shift).norm() == 0.0);
}

TEST_CASE("CG failure carries the residual") {
  const IsoModuli inc(2.0, 0.6), mat(3.0, 1.5);
  const VoxelField f = constant_field(4, inc);
  SolverConfig cfg = small_cfg();
  cfg.nx = 8;
  cfg.cg_max_iter = 2;
  EmbeddedSolver solver(f, iso_to_full(mat), cfg);
  try {
    solver.solve(canonical_basis(1, 2));
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("periodic solver: constant cell has zero corrector and exact flux") {
  const IsoModuli m(2.5, 1.1);
  const VoxelField cell = constant_field(4, m);
  SolverConfig cfg;
  cfg.nx = 8;
  cfg.cg_tol = 1e-10;
  const SymMat sigma = canonical_basis(1, 2);
  const PeriodicSolution sol = solve_periodic(cell, sigma, cfg);
  CHECK(sol.w.raw.norm() < 1e-12);
  CHECK((sol.flux.mandel() - apply(iso_to_full(m), sigma).mandel()).norm() < 1e-10);
}

TEST_CASE("periodic solver matches the laminate closed form") {
  // two-phase laminate normal to e1; oracle: 1-D interface conditions.
  const IsoModuli m1(2.0, 0.8), m2(4.0, 1.6);
  const int n = 4;  // layers of width 1/2: phase pattern 1,2,1,2 along x
  std::vector<ElasticTensor> cells;
  cells.reserve(n * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) cells.push_back(iso_to_full(i % 2 == 0 ? m1 : m2));
  const VoxelField cell(n, EllipticityBand(1.0, 8.0), cells);

  SolverConfig cfg;
  cfg.nx = 8;
  cfg.cg_tol = 1e-11;

  const SymMat sigma = canonical_basis(1, 1);
  const PeriodicSolution sol = solve_periodic(cell, sigma, cfg);

  // 1-D oracle: tau11 constant; w1' = (c - lam (s22+s33))/(lam+2mu) - s11
  // with c = s11 / <1/(lam+2mu)> here (s22 = s33 = 0); flux components are
  // volume averages of the per-phase stresses.
  const double p1 = 0.5, p2 = 0.5;
  const auto M = [](const IsoModuli& m) { return m.lambda() + 2.0 * m.mu; };
  const double c = 1.0 / (p1 / M(m1) + p2 / M(m2));
  const auto tau22 = [&](const IsoModuli& m) {
    const double w1p = c / M(m) - 1.0;
    return m.lambda() * (1.0 + w1p);
  };
  const double flux11 = c;
  const double flux22 = p1 * tau22(m1) + p2 * tau22(m2);

  CHECK(sol.flux.to_matrix()(0, 0) == doctest::Approx(flux11).epsilon(1e-8));
  CHECK(sol.flux.to_matrix()(1, 1) == doctest::Approx(flux22).epsilon(1e-8));
  CHECK(sol.flux.to_matrix()(2, 2) == doctest::Approx(flux22).epsilon(1e-8));
  CHECK(std::abs(sol.flux.to_matrix()(0, 1)) < 1e-9);
}

TEST_CASE("periodic reference tensor satisfies the Voigt bound") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(1.2, 3.8);
  const int n = 4;
  std::vector<ElasticTensor> cells;
  Mat6 mean = Mat6::Zero();
  for (int v = 0; v < n * n * n; ++v) {
    const ElasticTensor t = iso_to_full(IsoModuli(u(rng), u(rng) / 2.0));
    cells.push_back(t);
    mean += t.mandel();
  }
  mean /= n * n * n;
  const VoxelField cell(n, EllipticityBand(1.0, 4.0), cells);
  SolverConfig cfg;
  cfg.nx = 8;
  cfg.cg_tol = 1e-9;
  const ElasticTensor a_per = periodic_reference_tensor(cell, cfg);
  std::uniform_real_distribution<double> s(-1.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    Vec6 v;
    for (int i = 0; i < 6; ++i) v[i] = s(rng);
    const SymMat sigma = SymMat::from_mandel(v);
    CHECK(energy_quadratic(a_per, sigma) <= v.dot(mean * v) + 1e-8);
  }
}

TEST_CASE("unpreconditioned CG reaches the same solution") {
  const IsoModuli inc(2.0, 0.6), mat(3.0, 1.5);
  const VoxelField f = constant_field(4, inc);
  SolverConfig cfg = small_cfg();
  cfg.nx = 8;
  const DiscreteDisplacement wd = EmbeddedSolver(f, iso_to_full(mat), cfg).solve(canonical_basis(1, 2));
  cfg.preconditioner = SolverConfig::Precond::none;
  const DiscreteDisplacement wn = EmbeddedSolver(f, iso_to_full(mat), cfg).solve(canonical_basis(1, 2));
  CHECK((wd.raw - wn.raw).norm() / wd.raw.norm() < 1e-6);
}

TEST_CASE("element-parallel matvec is identical across worker counts") {
  const IsoModuli inc(2.0, 0.6), mat(3.0, 1.5);
  const VoxelField f = constant_field(8, inc);
  SolverConfig cfg = small_cfg();

  setenv("HOMOG_THREADS", "1", 1);
  const DiscreteDisplacement w1 = EmbeddedSolver(f, iso_to_full(mat), cfg).solve(canonical_basis(1, 2));
  setenv("HOMOG_THREADS", "3", 1);
  const DiscreteDisplacement w3 = EmbeddedSolver(f, iso_to_full(mat), cfg).solve(canonical_basis(1, 2));
  unsetenv("HOMOG_THREADS");
  CHECK((w1.raw - w3.raw).norm() == 0.0);
}
