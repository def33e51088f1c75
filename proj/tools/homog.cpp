// Batch front end: homogenize | eshelby | validate | sweep | gen.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "homog/acceptance.hpp"
#include "homog/microstructure.hpp"
#include "homog/pipeline.hpp"

namespace {

// Flags override the corresponding config-file values.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> nx;
  std::optional<double> L;
  std::optional<double> cg_tol;
  std::optional<std::string> schemes;  // comma-separated
  std::optional<std::string> out;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--seed", ov.seed, "generator seed");
  cmd->add_option("--nx", ov.nx, "elements per axis of the truncated box");
  cmd->add_option("--L", ov.L, "half-width of the truncation box");
  cmd->add_option("--cg-tol", ov.cg_tol, "CG relative tolerance");
  cmd->add_option("--schemes", ov.schemes, "comma-separated scheme list");
  cmd->add_option("--out", ov.out, "report output path");
}

int apply_overrides(homog::RunConfig& cfg, const Overrides& ov, std::ostream& diag) {
  if (ov.seed) cfg.generator.seed = *ov.seed;
  if (ov.nx) cfg.solver.nx = *ov.nx;
  if (ov.L) cfg.solver.L = *ov.L;
  if (ov.cg_tol) cfg.solver.cg_tol = *ov.cg_tol;
  if (ov.out) cfg.output = *ov.out;
  if (ov.schemes) {
    cfg.schemes.clear();
    std::string item;
    std::stringstream ss(*ov.schemes);
    while (std::getline(ss, item, ',')) {
      if (!homog::kKnownSchemes.count(item)) {
        diag << "config error: unknown scheme '" << item << "'\n";
        return homog::kConfigError;
      }
      cfg.schemes.insert(item);
    }
  }
  return homog::kOk;
}

bool parse_moduli_flag(const std::string& text, homog::IsoModuli& out, std::ostream& diag) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    diag << "expected 'kappa,mu' but got '" << text << "'\n";
    return false;
  }
  try {
    out = homog::IsoModuli(std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1)));
  } catch (const std::exception& e) {
    diag << "invalid moduli '" << text << "': " << e.what() << "\n";
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Effective elasticity tensors from embedded corrector problems"};
  app.require_subcommand(1);

  // homogenize -----------------------------------------------------------
  auto* homogenize = app.add_subcommand("homogenize", "run the generate -> solve -> schemes pipeline");
  std::string config_path;
  homogenize->add_option("--config", config_path, "JSON run configuration")->required();
  Overrides hov;
  add_override_flags(homogenize, hov);

  // eshelby ----------------------------------------------------------------
  auto* eshelby = app.add_subcommand("eshelby", "closed-form single-inclusion report");
  std::string inclusion_flag = "1,0.5", matrix_flag = "1,0.5", sigma_flag = "12";
  bool eshelby_json = false;
  eshelby->add_option("--inclusion", inclusion_flag, "inclusion moduli kappa,mu");
  eshelby->add_option("--matrix", matrix_flag, "matrix moduli kappa,mu");
  eshelby->add_option("--sigma", sigma_flag, "loading: 'id' or digit pair (e.g. 12)");
  eshelby->add_flag("--json", eshelby_json, "machine-readable output");

  // validate ---------------------------------------------------------------
  auto* validate = app.add_subcommand("validate", "run the acceptance criteria");
  bool quick = false, validate_json = false;
  validate->add_flag("--quick", quick, "analytic-only criteria (no FEM)");
  validate->add_flag("--json", validate_json, "machine-readable results");

  // sweep --------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "self-consistent moduli across rescaling factors");
  std::string sweep_config;
  std::vector<int> sweep_N{1, 2, 4};
  std::string sweep_csv;
  sweep->add_option("--config", sweep_config, "JSON run configuration")->required();
  sweep->add_option("--N", sweep_N, "rescale factors");
  sweep->add_option("--csv", sweep_csv, "CSV output path");
  Overrides sov;
  add_override_flags(sweep, sov);

  // gen --------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate a microstructure file");
  std::string gen_config;
  gen->add_option("--config", gen_config, "JSON run configuration")->required();
  Overrides gov;
  add_override_flags(gen, gov);  // --out names the .voxf file here

  CLI11_PARSE(app, argc, argv);

  try {
    if (homogenize->parsed()) {
      homog::RunConfig cfg;
      try {
        cfg = homog::load_run_config(config_path);
      } catch (const homog::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return homog::kConfigError;
      }
      if (const int rc = apply_overrides(cfg, hov, std::cerr); rc != homog::kOk) return rc;
      try {
        const homog::Json report = homog::run_homogenize(cfg);
        if (!cfg.output.empty()) {
          std::ofstream os(cfg.output);
          if (!os) {
            std::cerr << "config error: cannot write " << cfg.output << "\n";
            return homog::kConfigError;
          }
          os << report.dump(2) << "\n";
        } else {
          std::cout << report.dump(2) << "\n";
        }
        return homog::kOk;
      } catch (const homog::FixedPointError& e) {
        std::cerr << "fixed-point error: " << e.what() << "\n";
        return homog::kFixedPointError;
      } catch (const homog::SolverError& e) {
        std::cerr << "solver error: " << e.what() << " (residual " << e.residual() << ")\n";
        return homog::kSolverError;
      }
    }

    if (eshelby->parsed()) {
      homog::EshelbyCliArgs args;
      if (!parse_moduli_flag(inclusion_flag, args.inclusion, std::cerr)) return homog::kConfigError;
      if (!parse_moduli_flag(matrix_flag, args.matrix, std::cerr)) return homog::kConfigError;
      args.sigma = sigma_flag;
      args.json = eshelby_json;
      return homog::cmd_eshelby(args, std::cout);
    }

    if (validate->parsed()) {
      const auto results = homog::run_acceptance({.quick = quick});
      return homog::report_acceptance(results, validate_json, std::cout);
    }

    if (sweep->parsed()) {
      homog::RunConfig cfg;
      try {
        cfg = homog::load_run_config(sweep_config);
      } catch (const homog::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return homog::kConfigError;
      }
      if (const int rc = apply_overrides(cfg, sov, std::cerr); rc != homog::kOk) return rc;
      try {
        const homog::Json report = homog::run_sweep(cfg, sweep_N);
        if (!sweep_csv.empty()) {
          std::ofstream os(sweep_csv);
          os << "N,kappa4,mu4,outer_iterations\n";
          for (const auto& row : report.at("sweep"))
            os << row.at("N") << "," << row.at("kappa4") << "," << row.at("mu4") << ","
               << row.at("outer_iterations") << "\n";
        }
        if (!cfg.output.empty()) {
          std::ofstream os(cfg.output);
          os << report.dump(2) << "\n";
        } else {
          std::cout << report.dump(2) << "\n";
        }
        return homog::kOk;
      } catch (const homog::FixedPointError& e) {
        std::cerr << "fixed-point error: " << e.what() << "\n";
        return homog::kFixedPointError;
      } catch (const homog::SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return homog::kSolverError;
      }
    }

    if (gen->parsed()) {
      homog::RunConfig cfg;
      try {
        cfg = homog::load_run_config(gen_config);
      } catch (const homog::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return homog::kConfigError;
      }
      if (const int rc = apply_overrides(cfg, gov, std::cerr); rc != homog::kOk) return rc;
      const std::string gen_out = gov.out.value_or("field.voxf");
      const homog::VoxelField field = homog::generate(cfg.generator);
      homog::save_voxel_field(gen_out, field,
                              {homog::generator_name(cfg.generator.kind), cfg.generator.seed,
                               homog::spec_to_text(cfg.generator)});
      std::cout << "wrote " << gen_out << " (n=" << field.n() << ")\n";
      return homog::kOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
