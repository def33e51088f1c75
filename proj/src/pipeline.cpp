#include "homog/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include "homog/concavity.hpp"
#include "homog/eshelby.hpp"

namespace homog {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double require_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError("config field '" + path + "' must be a number");
  return j.get<double>();
}

double number_or(const Json& parent, const std::string& key, const std::string& path, double fallback) {
  if (!parent.contains(key)) return fallback;
  return require_number(parent.at(key), path + "." + key);
}

IsoModuli parse_moduli(const Json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("kappa") || !j.contains("mu"))
    throw ConfigError("config field '" + path + "' must be an object with kappa and mu");
  try {
    return IsoModuli(require_number(j.at("kappa"), path + ".kappa"), require_number(j.at("mu"), path + ".mu"));
  } catch (const std::domain_error& e) {
    throw ConfigError("config field '" + path + "': " + e.what());
  }
}

Json moduli_to_json(const IsoModuli& m) { return Json{{"kappa", m.kappa}, {"mu", m.mu}}; }

Json mandel_to_json(const ElasticTensor& a) {
  Json rows = Json::array();
  for (int i = 0; i < 6; ++i) {
    Json row = Json::array();
    for (int j = 0; j < 6; ++j) row.push_back(a.mandel()(i, j));
    rows.push_back(row);
  }
  return rows;
}

Json tensor_report(const ElasticTensor& a) {
  const IsoModuli iso = iso_projection(a);
  return Json{{"mandel", mandel_to_json(a)}, {"iso_projection", moduli_to_json(iso)}};
}

Json trace_to_json(const FixedPointTrace& trace) {
  Json steps = Json::array();
  for (const auto& s : trace.iterates)
    steps.push_back(Json{{"kappa", s.kappa}, {"mu", s.mu}, {"F_res", s.F_res}, {"G_res", s.G_res}});
  return Json{{"iterates", steps}, {"converged", trace.converged}, {"tol", trace.tol}};
}

}  // namespace

RunConfig parse_run_config(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  RunConfig cfg;
  if (doc.contains("format_version")) {
    cfg.format_version = static_cast<int>(require_number(doc.at("format_version"), "format_version"));
    if (cfg.format_version != 1) throw ConfigError("config field 'format_version' must be 1");
  }

  if (!doc.contains("band")) throw ConfigError("missing config field 'band'");
  const Json& band = doc.at("band");
  const double alpha = require_number(band.value("alpha", Json()), "band.alpha");
  const double beta = require_number(band.value("beta", Json()), "band.beta");
  try {
    if (band.contains("alpha_minus") || band.contains("beta_plus")) {
      cfg.generator.band =
          EllipticityBand(alpha, beta, require_number(band.at("alpha_minus"), "band.alpha_minus"),
                          require_number(band.at("beta_plus"), "band.beta_plus"));
    } else {
      cfg.generator.band = EllipticityBand(alpha, beta);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config field 'band': ") + e.what());
  }

  if (!doc.contains("generator")) throw ConfigError("missing config field 'generator'");
  const Json& gen = doc.at("generator");
  if (!gen.is_object() || !gen.contains("kind"))
    throw ConfigError("config field 'generator' must be an object with a 'kind'");
  const std::string kind = gen.at("kind").is_string() ? gen.at("kind").get<std::string>() : "";
  if (kind == "constant")
    cfg.generator.kind = GeneratorKind::constant;
  else if (kind == "two_phase_voxel")
    cfg.generator.kind = GeneratorKind::two_phase_voxel;
  else if (kind == "sphere_inclusions")
    cfg.generator.kind = GeneratorKind::sphere_inclusions;
  else if (kind == "laminate")
    cfg.generator.kind = GeneratorKind::laminate;
  else
    throw ConfigError("config field 'generator.kind' must be one of constant, two_phase_voxel, "
                      "sphere_inclusions, laminate");

  cfg.generator.n = static_cast<int>(number_or(gen, "n", "generator", 8));
  if (cfg.generator.n < 1) throw ConfigError("config field 'generator.n' must be positive");
  if (!gen.contains("phase1")) throw ConfigError("missing config field 'generator.phase1'");
  cfg.generator.phase1 = parse_moduli(gen.at("phase1"), "generator.phase1");
  if (gen.contains("phase2")) cfg.generator.phase2 = parse_moduli(gen.at("phase2"), "generator.phase2");
  cfg.generator.volume_fraction = number_or(gen, "volume_fraction", "generator", 0.5);
  cfg.generator.radius = number_or(gen, "radius", "generator", 0.25);
  cfg.generator.count = static_cast<int>(number_or(gen, "count", "generator", 4));
  cfg.generator.axis = static_cast<int>(number_or(gen, "axis", "generator", 1));
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned() && !doc.at("seed").is_number_integer())
      throw ConfigError("config field 'seed' must be an integer");
    cfg.generator.seed = doc.at("seed").get<std::uint64_t>();
  }

  if (doc.contains("solver")) {
    const Json& sol = doc.at("solver");
    cfg.solver.L = number_or(sol, "L", "solver", cfg.solver.L);
    cfg.solver.nx = static_cast<int>(number_or(sol, "nx", "solver", cfg.solver.nx));
    cfg.solver.cg_tol = number_or(sol, "cg_tol", "solver", cfg.solver.cg_tol);
    cfg.solver.cg_max_iter = static_cast<int>(number_or(sol, "cg_max_iter", "solver", cfg.solver.cg_max_iter));
    if (sol.contains("preconditioner")) {
      const std::string p = sol.at("preconditioner").is_string() ? sol.at("preconditioner").get<std::string>() : "";
      if (p == "none")
        cfg.solver.preconditioner = SolverConfig::Precond::none;
      else if (p == "diagonal")
        cfg.solver.preconditioner = SolverConfig::Precond::diagonal;
      else
        throw ConfigError("config field 'solver.preconditioner' must be 'none' or 'diagonal'");
    }
    if (cfg.solver.cg_tol <= 0.0) throw ConfigError("config field 'solver.cg_tol' must be positive");
  }

  if (!doc.contains("schemes")) throw ConfigError("missing config field 'schemes'");
  if (!doc.at("schemes").is_array()) throw ConfigError("config field 'schemes' must be an array");
  for (const auto& s : doc.at("schemes")) {
    if (!s.is_string() || !kKnownSchemes.count(s.get<std::string>()))
      throw ConfigError("config field 'schemes' contains an unknown scheme name");
    cfg.schemes.insert(s.get<std::string>());
  }
  if (cfg.schemes.count("eshelby_validate") && cfg.generator.kind != GeneratorKind::constant)
    throw ConfigError("scheme 'eshelby_validate' requires generator.kind = constant");
  // A2/A3 imply A1 (their exterior tensor); the pipeline computes and
  // reports it whenever any of A1..A4 is requested.

  if (doc.contains("tolerances")) {
    const Json& tol = doc.at("tolerances");
    cfg.tolerances.fixed_point_tol = number_or(tol, "fixed_point_tol", "tolerances", cfg.tolerances.fixed_point_tol);
    cfg.tolerances.bisection_tol = number_or(tol, "bisection_tol", "tolerances", cfg.tolerances.bisection_tol);
    cfg.tolerances.a1_coord_tol_factor =
        number_or(tol, "a1_coord_tol_factor", "tolerances", cfg.tolerances.a1_coord_tol_factor);
  }

  if (doc.contains("output")) {
    if (!doc.at("output").is_string()) throw ConfigError("config field 'output' must be a string");
    cfg.output = doc.at("output").get<std::string>();
  }
  if (doc.contains("csv_output")) {
    if (!doc.at("csv_output").is_string()) throw ConfigError("config field 'csv_output' must be a string");
    cfg.csv_output = doc.at("csv_output").get<std::string>();
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  Json doc;
  try {
    doc = Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_run_config(doc);
}

Json config_to_json(const RunConfig& cfg) {
  Json gen{{"kind", generator_name(cfg.generator.kind)},
           {"n", cfg.generator.n},
           {"phase1", moduli_to_json(cfg.generator.phase1)}};
  if (cfg.generator.phase2) gen["phase2"] = moduli_to_json(*cfg.generator.phase2);
  gen["volume_fraction"] = cfg.generator.volume_fraction;
  gen["radius"] = cfg.generator.radius;
  gen["count"] = cfg.generator.count;
  gen["axis"] = cfg.generator.axis;

  Json schemes = Json::array();
  for (const auto& s : cfg.schemes) schemes.push_back(s);

  return Json{
      {"format_version", cfg.format_version},
      {"seed", cfg.generator.seed},
      {"band",
       {{"alpha", cfg.generator.band.alpha},
        {"beta", cfg.generator.band.beta},
        {"alpha_minus", cfg.generator.band.alpha_minus},
        {"beta_plus", cfg.generator.band.beta_plus}}},
      {"generator", gen},
      {"solver",
       {{"L", cfg.solver.L},
        {"nx", cfg.solver.nx},
        {"cg_tol", cfg.solver.cg_tol},
        {"cg_max_iter", cfg.solver.cg_max_iter},
        {"preconditioner",
         cfg.solver.preconditioner == SolverConfig::Precond::diagonal ? "diagonal" : "none"}}},
      {"schemes", schemes},
      {"tolerances",
       {{"fixed_point_tol", cfg.tolerances.fixed_point_tol},
        {"bisection_tol", cfg.tolerances.bisection_tol},
        {"a1_coord_tol_factor", cfg.tolerances.a1_coord_tol_factor}}},
  };
}

std::string config_hash(const RunConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json run_homogenize(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  Json timings;
  Json results;

  const VoxelField field = generate(cfg.generator);

  std::optional<EnergyOracle> oracle;
  const auto need_oracle = [&]() -> EnergyOracle& {
    if (!oracle) oracle.emplace(make_fem_oracle(field, cfg.solver));
    return *oracle;
  };

  std::optional<IsoModuli> a1;
  if (cfg.schemes.count("A1") || cfg.schemes.count("A2") || cfg.schemes.count("A3") ||
      cfg.schemes.count("A4")) {
    const auto ta = Clock::now();
    Approx1Options opts;
    opts.coord_tol_factor = cfg.tolerances.a1_coord_tol_factor;
    // FEM energies carry O(cg_tol) noise; keep the unimodality diagnostic
    // above that level so it only fires on real concavity violations.
    opts.concavity_slack = std::max(opts.concavity_slack, 10.0 * cfg.solver.cg_tol);
    a1 = approx1_iso(need_oracle(), cfg.generator.band, opts);
    timings["A1_seconds"] = seconds_since(ta);
    results["A1"] = Json{{"kappa", a1->kappa},
                         {"mu", a1->mu},
                         {"backend", "fem"},
                         {"coord_tol", cfg.tolerances.a1_coord_tol_factor * cfg.generator.band.beta}};
  }

  if (cfg.schemes.count("A2")) {
    const auto ta = Clock::now();
    const Approx2Result a2 = approx2(field, iso_to_full(*a1), cfg.solver);
    timings["A2_seconds"] = seconds_since(ta);
    results["A2"] = tensor_report(a2.tensor);
    results["A2"]["asymmetry_rel"] = a2.asymmetry_rel;
    results["A2"]["backend"] = "fem";
  }

  if (cfg.schemes.count("A3")) {
    const auto ta = Clock::now();
    const ElasticTensor a3 = approx3(need_oracle(), iso_to_full(*a1));
    timings["A3_seconds"] = seconds_since(ta);
    results["A3"] = tensor_report(a3);
    results["A3"]["backend"] = "fem";
  }

  if (cfg.schemes.count("A4")) {
    const auto ta = Clock::now();
    FixedPointOptions fp;
    fp.tol = cfg.tolerances.fixed_point_tol;
    fp.bisect_tol = cfg.tolerances.bisection_tol;
    if (a1) fp.initial = *a1;
    const auto [a4, trace] = approx4_selfconsistent(need_oracle(), cfg.generator.band, fp);
    timings["A4_seconds"] = seconds_since(ta);
    results["A4"] = Json{{"kappa", a4.kappa},
                         {"mu", a4.mu},
                         {"backend", "fem"},
                         {"tol", fp.tol},
                         {"trace", trace_to_json(trace)}};
    if (!cfg.csv_output.empty()) write_trace_csv(trace, cfg.csv_output);
  }

  if (cfg.schemes.count("periodic_reference")) {
    const auto ta = Clock::now();
    SolverConfig pcfg = cfg.solver;
    // Periodic cell resolution: keep the embedded per-cube element density.
    pcfg.nx = std::max(cfg.generator.n, static_cast<int>(std::round(cfg.solver.nx / cfg.solver.L)));
    if (pcfg.nx % cfg.generator.n != 0) pcfg.nx = cfg.generator.n * (pcfg.nx / cfg.generator.n + 1);
    if (pcfg.nx % 2 != 0) pcfg.nx *= 2;
    const ElasticTensor a_per = periodic_reference_tensor(field, pcfg);
    timings["periodic_reference_seconds"] = seconds_since(ta);
    results["periodic_reference"] = tensor_report(a_per);
    results["periodic_reference"]["nx"] = pcfg.nx;
    results["periodic_reference"]["backend"] = "fem_periodic";
    results["periodic_reference"]["cg_tol"] = pcfg.cg_tol;
  }

  if (cfg.schemes.count("eshelby_validate")) {
    const auto ta = Clock::now();
    const IsoModuli inclusion = cfg.generator.phase1;
    // Exterior for the validation: a fixed contrast against the inclusion,
    // clamped to the band.
    const double kext = std::min(cfg.generator.band.beta, 1.4 * inclusion.kappa);
    const double muext = std::min(cfg.generator.band.beta / 2.0, 1.4 * inclusion.mu);
    const IsoModuli exterior(kext, muext);
    const ElasticTensor ext_full = iso_to_full(exterior);

    Json cases = Json::array();
    const int per_cube = static_cast<int>(std::round(cfg.solver.nx / cfg.solver.L));
    for (const double Lval : {2.0, 3.0, 4.0}) {
      SolverConfig vcfg = cfg.solver;
      vcfg.L = Lval;
      vcfg.nx = static_cast<int>(Lval * per_cube);
      const int n = per_cube;  // one element per voxel
      const VoxelField vfield = VoxelField::constant(n, cfg.generator.band, iso_to_full(inclusion));
      EmbeddedSolver solver(vfield, ext_full, vcfg);
      for (const auto& [label, sigma, exact] :
           {std::tuple<std::string, SymMat, double>{"12", canonical_basis(1, 2),
                                                    energy_shear_closed(inclusion, exterior)},
            std::tuple<std::string, SymMat, double>{"id", SymMat::identity(),
                                                    energy_bulk_closed(inclusion, exterior)}}) {
        SolveStats stats;
        const DiscreteDisplacement w = solver.solve(sigma, &stats);
        const double ep = solver.energy_primal(sigma, w);
        const double ef = solver.energy_flux(sigma, w);
        append_solve_audit({ep, ef, vcfg.cg_tol, solver.mean_load_energy(sigma), stats.iterations,
                            solver.korn_report(w)});
        cases.push_back(Json{{"L", Lval},
                             {"nx", vcfg.nx},
                             {"sigma", label},
                             {"analytic", exact},
                             {"fem", ep},
                             {"rel_err", std::abs(ep - exact) / std::abs(exact)}});
      }
    }
    timings["eshelby_validate_seconds"] = seconds_since(ta);
    results["eshelby_validate"] = Json{{"exterior", moduli_to_json(exterior)}, {"cases", cases}};
  }

  if (cfg.schemes.count("concavity_report")) {
    const auto ta = Clock::now();
    const IsoModuli m0 = cfg.generator.phase1;
    const auto [fpp, w] = shear_energy_second_derivative(m0.mu, m0.kappa, 1.1 * m0.mu);
    Json rep{{"f_second_derivative", fpp},
             {"gamma", {w.gamma0, w.gamma1, w.gamma2}},
             {"c", {w.c0, w.c1, w.c2}},
             {"discriminant", w.discriminant},
             {"bulk_second_derivative", bulk_energy_second_derivative(m0.kappa, m0.mu, m0.kappa)}};
    const EllipticityBand& band = cfg.generator.band;
    if (band.beta >= 2.5 * band.alpha) {
      const AffineCounterexample aff = affine_counterexample(band.alpha, band.beta, 9);
      rep["affine_segment"] = Json{{"slope", aff.slope},
                                   {"intercept", aff.intercept},
                                   {"max_deviation", aff.max_deviation}};
    }
    const EnergyOracle probe_oracle = make_eshelby_oracle(m0);
    const ElasticTensor lo = iso_to_full(IsoModuli(band.alpha, band.alpha / 2.0));
    const ElasticTensor hi = iso_to_full(IsoModuli(band.beta, band.beta / 2.0));
    const ConcavityProbeReport probe =
        energy_concavity_probe(probe_oracle, lo, hi, canonical_basis(1, 2), 9);
    rep["probe"] = Json{{"max_midpoint_violation", probe.max_midpoint_violation},
                        {"min_second_difference", probe.min_second_difference},
                        {"max_second_difference", probe.max_second_difference}};
    timings["concavity_report_seconds"] = seconds_since(ta);
    results["concavity_report"] = rep;
  }

  timings["total_seconds"] = seconds_since(t0);

  Json report{{"format_version", 1},
              {"config_hash", config_hash(cfg)},
              {"config", config_to_json(cfg)},
              {"results", results},
              {"timings", timings}};
  return report;
}

int cmd_homogenize(const std::string& config_path, std::ostream& out, std::ostream& diag) {
  RunConfig cfg;
  try {
    cfg = load_run_config(config_path);
  } catch (const ConfigError& e) {
    diag << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  try {
    const Json report = run_homogenize(cfg);
    if (!cfg.output.empty()) {
      std::ofstream os(cfg.output);
      if (!os) {
        diag << "config error: cannot write output file " << cfg.output << "\n";
        return kConfigError;
      }
      os << report.dump(2) << "\n";
    }
    out << report.dump(2) << "\n";
    return kOk;
  } catch (const FixedPointError& e) {
    diag << "fixed-point error: " << e.what() << "\n";
    for (const auto& s : e.trace().iterates)
      diag << "  kappa=" << s.kappa << " mu=" << s.mu << " |F|=" << s.F_res << " |G|=" << s.G_res << "\n";
    return kFixedPointError;
  } catch (const SolverError& e) {
    diag << "solver error: " << e.what() << " (residual " << e.residual() << ")\n";
    return kSolverError;
  } catch (const std::exception& e) {
    diag << "config error: " << e.what() << "\n";
    return kConfigError;
  }
}

int cmd_eshelby(const EshelbyCliArgs& args, std::ostream& out) {
  SymMat sigma = SymMat::identity();
  if (args.sigma != "id") {
    if (args.sigma.size() != 2 || args.sigma[0] < '1' || args.sigma[0] > '3' || args.sigma[1] < '1' ||
        args.sigma[1] > '3') {
      out << "invalid --sigma (expected 'id' or a digit pair like '12')\n";
      return kConfigError;
    }
    sigma = canonical_basis(args.sigma[0] - '0', args.sigma[1] - '0');
  }

  const EshelbyConfig cfg{args.inclusion, args.matrix, sigma};
  const EshelbySolution sol = solve(cfg);
  const double e_general = energy(cfg);

  double jump_residual = 0.0;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    Vec3 x(g(rng), g(rng), g(rng));
    x.normalize();
    jump_residual = std::max(jump_residual, (traction_jump(cfg, sol, x) - traction_jump_rhs(cfg, x)).norm());
  }

  Json doc{{"interior_matrix",
            {{"m11", sol.interior.to_matrix()(0, 0)},
             {"m22", sol.interior.to_matrix()(1, 1)},
             {"m33", sol.interior.to_matrix()(2, 2)},
             {"m23", sol.interior.to_matrix()(1, 2)},
             {"m13", sol.interior.to_matrix()(0, 2)},
             {"m12", sol.interior.to_matrix()(0, 1)}}},
           {"energy_general", e_general},
           {"traction_jump_residual", jump_residual}};
  if (args.sigma == "id")
    doc["energy_bulk_closed"] = energy_bulk_closed(args.inclusion, args.matrix);
  else if (args.sigma[0] != args.sigma[1])
    doc["energy_shear_closed"] = energy_shear_closed(args.inclusion, args.matrix);
  else
    doc["energy_diag_closed"] = energy_diag_closed(args.inclusion, args.matrix);

  if (args.json) {
    out << doc.dump(2) << "\n";
  } else {
    out << "interior matrix C:\n" << sol.interior.to_matrix() << "\n";
    out << "energy (general closed form): " << e_general << "\n";
    if (doc.contains("energy_shear_closed"))
      out << "energy (shear closed form):   " << doc["energy_shear_closed"].get<double>() << "\n";
    if (doc.contains("energy_diag_closed"))
      out << "energy (diagonal closed form): " << doc["energy_diag_closed"].get<double>() << "\n";
    if (doc.contains("energy_bulk_closed"))
      out << "energy (bulk closed form):    " << doc["energy_bulk_closed"].get<double>() << "\n";
    out << "traction jump residual:       " << jump_residual << "\n";
  }
  return kOk;
}

Json run_sweep(const RunConfig& cfg, const std::vector<int>& rescale_factors) {
  const VoxelField base = generate(cfg.generator);
  Json rows = Json::array();
  std::optional<IsoModuli> seed_pt;
  for (const int N : rescale_factors) {
    const VoxelField field = rescale(base, N);
    // Keep the mesh resolving the rescaled voxel grid: nx must be a
    // multiple of n*L, preserving at least the configured resolution.
    SolverConfig scfg = cfg.solver;
    const int block = static_cast<int>(std::round(field.n() * cfg.solver.L));
    scfg.nx = block * std::max(1, (cfg.solver.nx + block - 1) / block);
    const EnergyOracle oracle = make_fem_oracle(field, scfg);
    FixedPointOptions fp;
    fp.tol = cfg.tolerances.fixed_point_tol;
    fp.bisect_tol = cfg.tolerances.bisection_tol;
    fp.initial = seed_pt;
    const auto [a4, trace] = approx4_selfconsistent(oracle, cfg.generator.band, fp);
    seed_pt = a4;
    rows.push_back(Json{{"N", N},
                        {"kappa4", a4.kappa},
                        {"mu4", a4.mu},
                        {"outer_iterations", trace.iterates.size()},
                        {"converged", trace.converged}});
  }
  return Json{{"format_version", 1}, {"config_hash", config_hash(cfg)}, {"sweep", rows}};
}

void write_trace_csv(const FixedPointTrace& trace, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write CSV trace to " + path);
  os << "iteration,kappa,mu,F_residual,G_residual\n";
  for (size_t i = 0; i < trace.iterates.size(); ++i) {
    const auto& s = trace.iterates[i];
    os << i << "," << s.kappa << "," << s.mu << "," << s.F_res << "," << s.G_res << "\n";
  }
}

}  // namespace homog
