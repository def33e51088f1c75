#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "homog/tensor.hpp"

namespace homog {

/// Cubic voxel grid of elasticity tensors over [-1,1]^3, x-fastest storage.
/// Solvers on the truncated box read only the voxels whose center lies in
/// the closed unit ball; the periodic cell solver reads all of them. Every
/// stored tensor must satisfy the band's ellipticity bounds.
class VoxelField {
 public:
  VoxelField(int n, const EllipticityBand& band, std::vector<ElasticTensor> cells);

  static VoxelField constant(int n, const EllipticityBand& band, const ElasticTensor& value);

  int n() const { return n_; }
  const EllipticityBand& band() const { return band_; }

  int index(int ix, int iy, int iz) const { return ix + n_ * (iy + n_ * iz); }
  const ElasticTensor& cell(int ix, int iy, int iz) const { return cells_[index(ix, iy, iz)]; }
  const std::vector<ElasticTensor>& cells() const { return cells_; }

  Vec3 voxel_center(int ix, int iy, int iz) const;
  bool in_ball(int ix, int iy, int iz) const { return voxel_center(ix, iy, iz).squaredNorm() <= 1.0; }

 private:
  int n_;
  EllipticityBand band_;
  std::vector<ElasticTensor> cells_;
};

/// Provenance sidecar written next to the binary field file.
struct FieldProvenance {
  std::string generator = "unknown";
  std::uint64_t seed = 0;
  std::string note;
};

// Binary container: 64-byte header (magic "VOXF", version, n, band as four
// little-endian f64) followed by n^3 records of the 21 upper-triangle
// entries of the Mandel matrix, row-major, 8-byte floats.
void save_voxel_field(const std::string& path, const VoxelField& field, const FieldProvenance& prov);
VoxelField load_voxel_field(const std::string& path);
FieldProvenance load_field_provenance(const std::string& path);

/// Uniform hexahedral mesh on [-L,L]^3 with nx elements per axis. The mesh
/// must resolve the voxel grid: nx/(n L) a positive integer and the planes
/// x = +-1 must be element faces.
struct TruncatedBoxMesh {
  double L;
  int nx;

  TruncatedBoxMesh(double L_, int nx_);
  double h() const { return 2.0 * L / nx; }
  int nodes_per_axis() const { return nx + 1; }
  std::int64_t node_count() const {
    const std::int64_t m = nodes_per_axis();
    return m * m * m;
  }
};

/// Nodal 3-vector field. `raw` is the solver output (zero on the Dirichlet
/// boundary for the box mesh); the reported field subtracts `mean_shift` so
/// that its mean over the discrete ball vanishes. Strains and energies are
/// shift-invariant and always use `raw`.
struct DiscreteDisplacement {
  int nodes_per_axis = 0;
  double h = 0.0;
  double origin = 0.0;
  bool periodic = false;
  Eigen::VectorXd raw;
  Vec3 mean_shift = Vec3::Zero();

  Vec3 value(int ix, int iy, int iz) const;
};

struct SolverConfig {
  double cg_tol = 1e-8;
  int cg_max_iter = 20000;
  double L = 4.0;
  int nx = 48;
  enum class Precond { none, diagonal };
  Precond preconditioner = Precond::diagonal;
};

/// Conjugate-gradient failure; carries the final relative residual.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct SolveStats {
  int iterations = 0;
  double rel_residual = 0.0;
  /// |r.w| / load-energy scale at exit; bounds the primal/flux energy gap.
  double energy_gap_bound = 0.0;
};

struct KornReport {
  double e_norm = 0.0;
  double grad_norm = 0.0;
  double div_norm = 0.0;
  double max_grad = 0.0;  // max |grad w| over Gauss points
  // Pointwise excesses at Gauss points; nonpositive when the discrete
  // inequalities |e| <= |grad| and |div| <= sqrt(3)|grad| hold.
  double max_e_excess = 0.0;
  double max_div_excess = 0.0;
};

/// Matrix-free FEM operator for the embedded corrector problem on the
/// truncated box: trilinear hexahedra, 2x2x2 Gauss points, homogeneous
/// Dirichlet data on the box boundary. The sphere load is assembled in its
/// volumetric form b(v) = integral_B e(v).((A - field) sigma), which is an
/// exact rewriting of the surface term for constant A sigma.
class EmbeddedSolver {
 public:
  EmbeddedSolver(const VoxelField& field, const ElasticTensor& exterior, const SolverConfig& cfg);

  /// Swap the exterior tensor, keeping the mesh and voxel maps (used by the
  /// schemes that sweep over exterior tensors).
  void set_exterior(const ElasticTensor& exterior);

  DiscreteDisplacement solve(const SymMat& sigma, SolveStats* stats = nullptr,
                             const Eigen::VectorXd* warm_start = nullptr) const;

  // Energy forms evaluated on a solution of this operator's problem; the
  // pair agrees up to the CG tolerance.
  double energy_primal(const SymMat& sigma, const DiscreteDisplacement& w) const;
  double energy_flux(const SymMat& sigma, const DiscreteDisplacement& w) const;
  /// (1/|B_h|) integral_B field (sigma + e(w)).
  SymMat flux_average(const SymMat& sigma, const DiscreteDisplacement& w) const;

  KornReport korn_report(const DiscreteDisplacement& w) const;
  /// Max |e| over Gauss points of an arbitrary nodal field (rigid-motion checks).
  double max_gauss_strain(const Eigen::VectorXd& nodal) const;
  /// (1/|B_h|) integral_B sigma . field sigma, the natural energy scale of
  /// the load.
  double mean_load_energy(const SymMat& sigma) const;
  /// Node coordinates of the mesh (for synthesizing nodal fields in tests).
  Vec3 node_position(int ix, int iy, int iz) const;

  const TruncatedBoxMesh& mesh() const { return mesh_; }
  double ball_volume() const;
  std::int64_t dof_count() const { return 3 * mesh_.node_count(); }

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
  TruncatedBoxMesh mesh_;
};

/// One-shot wrapper around EmbeddedSolver.
DiscreteDisplacement solve_embedded(const VoxelField& field, const ElasticTensor& exterior,
                                    const SymMat& sigma, const SolverConfig& cfg,
                                    SolveStats* stats = nullptr);

double energy_primal(const VoxelField& field, const ElasticTensor& exterior, const SymMat& sigma,
                     const DiscreteDisplacement& w, const SolverConfig& cfg);
double energy_flux(const VoxelField& field, const ElasticTensor& exterior, const SymMat& sigma,
                   const DiscreteDisplacement& w, const SolverConfig& cfg);
SymMat flux_average(const VoxelField& field, const SymMat& sigma, const DiscreteDisplacement& w,
                    const SolverConfig& cfg);

struct PeriodicSolution {
  DiscreteDisplacement w;
  SymMat flux;  // column sigma of the periodic reference tensor
  SolveStats stats;
};

/// Periodic corrector on the unit cell [-1,1]^3 (full cube, no ball
/// restriction). Gauge: one node pinned during the solve, zero cell mean
/// after. nx must be a positive multiple of the voxel count.
PeriodicSolution solve_periodic(const VoxelField& cellfield, const SymMat& sigma, const SolverConfig& cfg);

/// Assembles the full periodic reference tensor column by column.
ElasticTensor periodic_reference_tensor(const VoxelField& cellfield, const SolverConfig& cfg);

}  // namespace homog
