#include "homog/embedded_fem.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "homog/parallel.hpp"

namespace homog {

namespace {

using Mat624 = Eigen::Matrix<double, 6, 24>;
using Mat924 = Eigen::Matrix<double, 9, 24>;
using Mat24 = Eigen::Matrix<double, 24, 24>;
using Vec24 = Eigen::Matrix<double, 24, 1>;

constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kGauss = 0.5773502691896257;  // 1/sqrt(3)

// Local corner l -> (di, dj, dk) with l = di + 2 dj + 4 dk.
inline void corner(int l, int& di, int& dj, int& dk) {
  di = l & 1;
  dj = (l >> 1) & 1;
  dk = (l >> 2) & 1;
}

// Strain (Mandel) and gradient matrices of the trilinear hexahedron at the
// eight Gauss points, for grid spacing h. Dof order: node-major (ux uy uz).
struct ElementBasis {
  std::array<Mat624, 8> B;    // Mandel strain rows
  std::array<Mat924, 8> Bg;   // gradient rows (ux,x ux,y ux,z uy,x ...)
  Mat624 Bsum;                // sum of B over Gauss points
  double wq;                  // Gauss-point volume (h/2)^3

  explicit ElementBasis(double h) {
    wq = (h / 2.0) * (h / 2.0) * (h / 2.0);
    Bsum.setZero();
    for (int q = 0; q < 8; ++q) {
      int qi, qj, qk;
      corner(q, qi, qj, qk);
      const double gx = kGauss * (2 * qi - 1);
      const double gy = kGauss * (2 * qj - 1);
      const double gz = kGauss * (2 * qk - 1);
      Mat624& Bq = B[q];
      Mat924& Gq = Bg[q];
      Bq.setZero();
      Gq.setZero();
      for (int l = 0; l < 8; ++l) {
        int di, dj, dk;
        corner(l, di, dj, dk);
        const double xl = 2 * di - 1, yl = 2 * dj - 1, zl = 2 * dk - 1;
        const double s = 2.0 / h;  // reference-to-physical derivative factor
        const double dNx = s * (xl / 8.0) * (1 + yl * gy) * (1 + zl * gz);
        const double dNy = s * (yl / 8.0) * (1 + xl * gx) * (1 + zl * gz);
        const double dNz = s * (zl / 8.0) * (1 + xl * gx) * (1 + yl * gy);
        const int c = 3 * l;
        Bq(0, c + 0) = dNx;
        Bq(1, c + 1) = dNy;
        Bq(2, c + 2) = dNz;
        Bq(3, c + 1) = kInvSqrt2 * dNz;
        Bq(3, c + 2) = kInvSqrt2 * dNy;
        Bq(4, c + 0) = kInvSqrt2 * dNz;
        Bq(4, c + 2) = kInvSqrt2 * dNx;
        Bq(5, c + 0) = kInvSqrt2 * dNy;
        Bq(5, c + 1) = kInvSqrt2 * dNx;
        Gq(0, c + 0) = dNx;
        Gq(1, c + 0) = dNy;
        Gq(2, c + 0) = dNz;
        Gq(3, c + 1) = dNx;
        Gq(4, c + 1) = dNy;
        Gq(5, c + 1) = dNz;
        Gq(6, c + 2) = dNx;
        Gq(7, c + 2) = dNy;
        Gq(8, c + 2) = dNz;
      }
      Bsum += Bq;
    }
  }

  // wq * sum_q B_q^T C B_q
  Mat24 stiffness(const Mat6& C) const {
    Mat24 K = Mat24::Zero();
    for (int q = 0; q < 8; ++q) K.noalias() += B[q].transpose() * (C * B[q]);
    return wq * K;
  }
};

// Deduplicating tensor palette keyed on the exact matrix bytes.
struct Palette {
  std::vector<Mat6> tensors;
  std::unordered_map<std::string, int> lookup;

  int intern(const Mat6& a) {
    std::string key(reinterpret_cast<const char*>(a.data()), sizeof(double) * 36);
    auto [it, inserted] = lookup.try_emplace(std::move(key), static_cast<int>(tensors.size()));
    if (inserted) tensors.push_back(a);
    return it->second;
  }
};

bool spectrum_within(const ElasticTensor& a, double lo, double hi) {
  const Vec6 ev = a.eigenvalues();
  const double slack = 1e-10 * hi;
  return ev[0] >= lo - slack && ev[5] <= hi + slack;
}

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

void write_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

double read_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace

VoxelField::VoxelField(int n, const EllipticityBand& band, std::vector<ElasticTensor> cells)
    : n_(n), band_(band), cells_(std::move(cells)) {
  if (n_ < 1) throw std::invalid_argument("VoxelField: n must be positive");
  if (cells_.size() != static_cast<size_t>(n_) * n_ * n_)
    throw std::invalid_argument("VoxelField: cell count must be n^3");
  for (const auto& c : cells_)
    if (!in_class_M(c, band_)) throw std::domain_error("VoxelField: tensor violates the ellipticity band");
}

VoxelField VoxelField::constant(int n, const EllipticityBand& band, const ElasticTensor& value) {
  return VoxelField(n, band, std::vector<ElasticTensor>(static_cast<size_t>(n) * n * n, value));
}

Vec3 VoxelField::voxel_center(int ix, int iy, int iz) const {
  const double v = 2.0 / n_;
  return Vec3(-1.0 + (ix + 0.5) * v, -1.0 + (iy + 0.5) * v, -1.0 + (iz + 0.5) * v);
}

void save_voxel_field(const std::string& path, const VoxelField& field, const FieldProvenance& prov) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_voxel_field: cannot open " + path);
  os.write("VOXF", 4);
  write_u32(os, 1);
  write_u32(os, static_cast<std::uint32_t>(field.n()));
  write_u32(os, 0);
  write_f64(os, field.band().alpha);
  write_f64(os, field.band().beta);
  write_f64(os, field.band().alpha_minus);
  write_f64(os, field.band().beta_plus);
  const char pad[16] = {};
  os.write(pad, 16);
  for (const auto& c : field.cells()) {
    const Mat6& a = c.mandel();
    for (int i = 0; i < 6; ++i)
      for (int j = i; j < 6; ++j) write_f64(os, a(i, j));
  }
  if (!os) throw std::runtime_error("save_voxel_field: write failed for " + path);

  std::ofstream side(path + ".txt");
  side << "generator=" << prov.generator << "\n"
       << "seed=" << prov.seed << "\n";
  if (!prov.note.empty()) side << "note=" << prov.note << "\n";
}

VoxelField load_voxel_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_voxel_field: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, "VOXF", 4) != 0)
    throw std::runtime_error("load_voxel_field: bad magic in " + path);
  const std::uint32_t version = read_u32(is);
  if (version != 1) throw std::runtime_error("load_voxel_field: unsupported version");
  const int n = static_cast<int>(read_u32(is));
  read_u32(is);  // reserved
  const double alpha = read_f64(is), beta = read_f64(is);
  const double alpha_minus = read_f64(is), beta_plus = read_f64(is);
  is.seekg(64);
  std::vector<ElasticTensor> cells;
  cells.reserve(static_cast<size_t>(n) * n * n);
  for (std::int64_t v = 0; v < static_cast<std::int64_t>(n) * n * n; ++v) {
    Mat6 a;
    for (int i = 0; i < 6; ++i)
      for (int j = i; j < 6; ++j) {
        const double x = read_f64(is);
        a(i, j) = a(j, i) = x;
      }
    cells.emplace_back(a);
  }
  if (!is) throw std::runtime_error("load_voxel_field: truncated file " + path);
  return VoxelField(n, EllipticityBand(alpha, beta, alpha_minus, beta_plus), std::move(cells));
}

FieldProvenance load_field_provenance(const std::string& path) {
  std::ifstream side(path + ".txt");
  if (!side) throw std::runtime_error("load_field_provenance: missing sidecar for " + path);
  FieldProvenance prov;
  std::string line;
  while (std::getline(side, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "generator") prov.generator = val;
    else if (key == "seed") prov.seed = std::stoull(val);
    else if (key == "note") prov.note = val;
  }
  return prov;
}

TruncatedBoxMesh::TruncatedBoxMesh(double L_, int nx_) : L(L_), nx(nx_) {
  if (!(L >= 2.0)) throw std::invalid_argument("TruncatedBoxMesh: L must be >= 2");
  if (nx < 2 || nx % 2 != 0) throw std::invalid_argument("TruncatedBoxMesh: nx must be even and >= 2");
}

Vec3 DiscreteDisplacement::value(int ix, int iy, int iz) const {
  const int id = ix + nodes_per_axis * (iy + nodes_per_axis * iz);
  return Vec3(raw.segment<3>(3 * id)) - mean_shift;
}

// ---------------------------------------------------------------------------
// EmbeddedSolver

struct EmbeddedSolver::Impl {
  SolverConfig cfg;
  int nx = 0;      // elements per axis
  int np = 0;      // nodes per axis
  double h = 0.0;  // spacing
  double L = 0.0;
  ElementBasis basis{1.0};

  Palette palette;                    // [0] is the exterior tensor
  std::vector<Mat24> Ke;              // per palette entry
  std::vector<std::int32_t> elem_pal;
  std::vector<std::uint8_t> elem_ball;
  std::int64_t ball_elems = 0;
  std::array<std::vector<std::int32_t>, 8> colors;
  std::vector<std::uint8_t> node_fixed;
  Eigen::VectorXd diag;
  Mat6 exterior;
  EllipticityBand band{1.0, 2.0};

  std::int64_t elem_count() const { return static_cast<std::int64_t>(nx) * nx * nx; }
  std::int64_t node_count() const { return static_cast<std::int64_t>(np) * np * np; }

  inline std::int64_t node_id(int ix, int iy, int iz) const {
    return ix + static_cast<std::int64_t>(np) * (iy + static_cast<std::int64_t>(np) * iz);
  }

  inline void element_nodes(std::int64_t e, std::int64_t ids[8]) const {
    const int i = static_cast<int>(e % nx);
    const int j = static_cast<int>((e / nx) % nx);
    const int k = static_cast<int>(e / (static_cast<std::int64_t>(nx) * nx));
    for (int l = 0; l < 8; ++l) {
      int di, dj, dk;
      corner(l, di, dj, dk);
      ids[l] = node_id(i + di, j + dj, k + dk);
    }
  }

  void build_stiffness_cache() {
    Ke.clear();
    Ke.reserve(palette.tensors.size());
    for (const auto& C : palette.tensors) Ke.push_back(basis.stiffness(C));
    diag.setZero(3 * node_count());
    std::int64_t ids[8];
    for (std::int64_t e = 0; e < elem_count(); ++e) {
      element_nodes(e, ids);
      const Mat24& K = Ke[elem_pal[e]];
      for (int l = 0; l < 8; ++l)
        diag.segment<3>(3 * ids[l]) += K.diagonal().segment<3>(3 * l);
    }
    for (std::int64_t nid = 0; nid < node_count(); ++nid)
      if (node_fixed[nid]) diag.segment<3>(3 * nid).setOnes();
  }

  void zero_fixed(Eigen::VectorXd& v) const {
    for (std::int64_t nid = 0; nid < node_count(); ++nid)
      if (node_fixed[nid]) v.segment<3>(3 * nid).setZero();
  }

  // y = K x on the free dofs; x must vanish on fixed dofs.
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y.setZero();
    for (const auto& group : colors) {
      parallel_for_chunks(static_cast<std::int64_t>(group.size()), [&](std::int64_t lo, std::int64_t hi) {
        std::int64_t ids[8];
        Vec24 u, f;
        for (std::int64_t idx = lo; idx < hi; ++idx) {
          const std::int64_t e = group[idx];
          element_nodes(e, ids);
          for (int l = 0; l < 8; ++l) u.segment<3>(3 * l) = x.segment<3>(3 * ids[l]);
          f.noalias() = Ke[elem_pal[e]] * u;
          for (int l = 0; l < 8; ++l) y.segment<3>(3 * ids[l]) += f.segment<3>(3 * l);
        }
      });
    }
    for (std::int64_t nid = 0; nid < node_count(); ++nid)
      if (node_fixed[nid]) y.segment<3>(3 * nid).setZero();
  }

  double load_energy_scale(const Vec6& s) const {
    double acc = 0.0;
    for (std::int64_t e = 0; e < elem_count(); ++e)
      if (elem_ball[e]) acc += s.dot(palette.tensors[elem_pal[e]] * s);
    return acc * h * h * h;
  }

  Eigen::VectorXd assemble_rhs(const Vec6& s) const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(3 * node_count());
    std::int64_t ids[8];
    for (std::int64_t e = 0; e < elem_count(); ++e) {
      if (!elem_ball[e]) continue;
      const Vec6 g = exterior * s - palette.tensors[elem_pal[e]] * s;
      const Vec24 f = basis.wq * (basis.Bsum.transpose() * g);
      element_nodes(e, ids);
      for (int l = 0; l < 8; ++l) b.segment<3>(3 * ids[l]) += f.segment<3>(3 * l);
    }
    zero_fixed(b);
    return b;
  }
};

EmbeddedSolver::EmbeddedSolver(const VoxelField& field, const ElasticTensor& exterior,
                               const SolverConfig& cfg)
    : impl_(std::make_shared<Impl>()), mesh_(cfg.L, cfg.nx) {
  Impl& im = *impl_;
  im.cfg = cfg;
  im.nx = cfg.nx;
  im.np = cfg.nx + 1;
  im.L = cfg.L;
  im.h = mesh_.h();
  im.basis = ElementBasis(im.h);
  im.band = field.band();

  // The mesh must resolve the voxel grid and the cube faces x = +-1.
  const int n = field.n();
  const double ratio = cfg.nx / (n * cfg.L);
  const double cube_elems = cfg.nx / cfg.L;  // elements across [-1,1] per axis
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0 ||
      std::abs(cube_elems - std::round(cube_elems)) > 1e-9 ||
      static_cast<std::int64_t>(std::round(cube_elems)) % 2 != 0)
    throw std::invalid_argument("EmbeddedSolver: nx must be an even-per-cube multiple of n*L");

  if (!spectrum_within(exterior, field.band().alpha_minus, field.band().beta_plus))
    throw std::domain_error("EmbeddedSolver: exterior tensor violates the extended ellipticity band");

  im.exterior = exterior.mandel();
  im.palette.intern(im.exterior);

  im.elem_pal.assign(im.elem_count(), 0);
  im.elem_ball.assign(im.elem_count(), 0);
  std::int64_t e = 0;
  for (int k = 0; k < im.nx; ++k)
    for (int j = 0; j < im.nx; ++j)
      for (int i = 0; i < im.nx; ++i, ++e) {
        const double cx = -im.L + (i + 0.5) * im.h;
        const double cy = -im.L + (j + 0.5) * im.h;
        const double cz = -im.L + (k + 0.5) * im.h;
        if (std::abs(cx) > 1.0 || std::abs(cy) > 1.0 || std::abs(cz) > 1.0) continue;
        const double vox = 2.0 / n;
        const int vi = std::min(n - 1, static_cast<int>((cx + 1.0) / vox));
        const int vj = std::min(n - 1, static_cast<int>((cy + 1.0) / vox));
        const int vk = std::min(n - 1, static_cast<int>((cz + 1.0) / vox));
        if (!field.in_ball(vi, vj, vk)) continue;
        im.elem_pal[e] = im.palette.intern(field.cell(vi, vj, vk).mandel());
        im.elem_ball[e] = 1;
        ++im.ball_elems;
      }

  e = 0;
  for (int k = 0; k < im.nx; ++k)
    for (int j = 0; j < im.nx; ++j)
      for (int i = 0; i < im.nx; ++i, ++e) im.colors[(i & 1) | ((j & 1) << 1) | ((k & 1) << 2)].push_back(e);

  im.node_fixed.assign(im.node_count(), 0);
  for (int k = 0; k < im.np; ++k)
    for (int j = 0; j < im.np; ++j)
      for (int i = 0; i < im.np; ++i)
        if (i == 0 || j == 0 || k == 0 || i == im.nx || j == im.nx || k == im.nx)
          im.node_fixed[im.node_id(i, j, k)] = 1;

  im.build_stiffness_cache();
}

void EmbeddedSolver::set_exterior(const ElasticTensor& exterior) {
  Impl& im = *impl_;
  if (!spectrum_within(exterior, im.band.alpha_minus, im.band.beta_plus))
    throw std::domain_error("EmbeddedSolver: exterior tensor violates the extended ellipticity band");
  im.exterior = exterior.mandel();
  im.palette.tensors[0] = im.exterior;
  // Exterior lives at palette slot 0; interned ball tensors are unaffected.
  im.build_stiffness_cache();
}

DiscreteDisplacement EmbeddedSolver::solve(const SymMat& sigma, SolveStats* stats,
                                           const Eigen::VectorXd* warm_start) const {
  const Impl& im = *impl_;
  const std::int64_t ndof = 3 * im.node_count();
  const Vec6 s = sigma.mandel();

  DiscreteDisplacement out;
  out.nodes_per_axis = im.np;
  out.h = im.h;
  out.origin = -im.L;
  out.periodic = false;

  Eigen::VectorXd b = im.assemble_rhs(s);
  const double bnorm = b.norm();
  const double scale = im.load_energy_scale(s);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(ndof);
  if (bnorm == 0.0) {
    out.raw = std::move(x);
    if (stats) *stats = {0, 0.0, 0.0};
    return out;
  }
  if (warm_start && warm_start->size() == ndof) {
    x = *warm_start;
    im.zero_fixed(x);
  }

  const bool use_diag = im.cfg.preconditioner == SolverConfig::Precond::diagonal;
  Eigen::VectorXd r(ndof), z(ndof), p(ndof), q(ndof);
  im.apply(x, q);
  r = b - q;
  z = use_diag ? (r.array() / im.diag.array()).matrix() : r;
  p = z;
  double rz = r.dot(z);

  int it = 0;
  double rel = r.norm() / bnorm;
  bool ok = rel <= im.cfg.cg_tol && std::abs(r.dot(x)) <= im.cfg.cg_tol * scale;
  while (!ok && it < im.cfg.cg_max_iter) {
    im.apply(p, q);
    const double alpha = rz / p.dot(q);
    x += alpha * p;
    r -= alpha * q;
    ++it;
    rel = r.norm() / bnorm;
    if (rel <= im.cfg.cg_tol && std::abs(r.dot(x)) <= im.cfg.cg_tol * scale) {
      ok = true;
      break;
    }
    z = use_diag ? (r.array() / im.diag.array()).matrix() : r;
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  if (!ok) throw SolverError("embedded CG did not converge: rel residual " + std::to_string(rel), rel);

  if (stats) *stats = {it, rel, std::abs(r.dot(x)) / scale};

  // Zero-mean gauge over the discrete ball, reported via the shift.
  Vec3 mean = Vec3::Zero();
  std::int64_t ids[8];
  for (std::int64_t e = 0; e < im.elem_count(); ++e) {
    if (!im.elem_ball[e]) continue;
    im.element_nodes(e, ids);
    Vec3 avg = Vec3::Zero();
    for (int l = 0; l < 8; ++l) avg += x.segment<3>(3 * ids[l]);
    mean += avg / 8.0;
  }
  out.mean_shift = mean / static_cast<double>(im.ball_elems);
  out.raw = std::move(x);
  return out;
}

double EmbeddedSolver::ball_volume() const {
  const Impl& im = *impl_;
  return im.h * im.h * im.h * static_cast<double>(im.ball_elems);
}

double EmbeddedSolver::energy_primal(const SymMat& sigma, const DiscreteDisplacement& w) const {
  const Impl& im = *impl_;
  const Vec6 s = sigma.mandel();
  double load = 0.0, corr = 0.0;
  std::int64_t ids[8];
  Vec24 u;
  for (std::int64_t e = 0; e < im.elem_count(); ++e) {
    const Mat6& C = im.palette.tensors[im.elem_pal[e]];
    if (im.elem_ball[e]) load += 8.0 * im.basis.wq * s.dot(C * s);
    im.element_nodes(e, ids);
    for (int l = 0; l < 8; ++l) u.segment<3>(3 * l) = w.raw.segment<3>(3 * ids[l]);
    for (int q = 0; q < 8; ++q) {
      const Vec6 eq = im.basis.B[q] * u;
      corr += im.basis.wq * eq.dot(C * eq);
    }
  }
  return (load - corr) / ball_volume();
}

double EmbeddedSolver::energy_flux(const SymMat& sigma, const DiscreteDisplacement& w) const {
  const Impl& im = *impl_;
  const Vec6 s = sigma.mandel();
  double acc = 0.0;
  std::int64_t ids[8];
  Vec24 u;
  for (std::int64_t e = 0; e < im.elem_count(); ++e) {
    if (!im.elem_ball[e]) continue;
    const Mat6& C = im.palette.tensors[im.elem_pal[e]];
    acc += 8.0 * im.basis.wq * s.dot(C * s);
    im.element_nodes(e, ids);
    for (int l = 0; l < 8; ++l) u.segment<3>(3 * l) = w.raw.segment<3>(3 * ids[l]);
    const Vec6 esum = im.basis.Bsum * u;
    // sigma . C e(w) - e(w) . (A sigma), aggregated over the Gauss points
    acc += im.basis.wq * (C * s - im.exterior * s).dot(esum);
  }
  return acc / ball_volume();
}

SymMat EmbeddedSolver::flux_average(const SymMat& sigma, const DiscreteDisplacement& w) const {
  const Impl& im = *impl_;
  const Vec6 s = sigma.mandel();
  Vec6 acc = Vec6::Zero();
  std::int64_t ids[8];
  Vec24 u;
  for (std::int64_t e = 0; e < im.elem_count(); ++e) {
    if (!im.elem_ball[e]) continue;
    const Mat6& C = im.palette.tensors[im.elem_pal[e]];
    im.element_nodes(e, ids);
    for (int l = 0; l < 8; ++l) u.segment<3>(3 * l) = w.raw.segment<3>(3 * ids[l]);
    acc += 8.0 * im.basis.wq * (C * s);
    acc += im.basis.wq * (C * (im.basis.Bsum * u));
  }
  return SymMat::from_mandel(acc / ball_volume());
}

KornReport EmbeddedSolver::korn_report(const DiscreteDisplacement& w) const {
  const Impl& im = *impl_;
  KornReport rep;
  double e2 = 0.0, g2 = 0.0, d2 = 0.0;
  rep.max_e_excess = rep.max_div_excess = -1e300;
  std::int64_t ids[8];
  Vec24 u;
  for (std::int64_t e = 0; e < im.elem_count(); ++e) {
    im.element_nodes(e, ids);
    for (int l = 0; l < 8; ++l) u.segment<3>(3 * l) = w.raw.segment<3>(3 * ids[l]);
    for (int q = 0; q < 8; ++q) {
      const Vec6 eq = im.basis.B[q] * u;
      const Eigen::Matrix<double, 9, 1> gq = im.basis.Bg[q] * u;
      const double div = gq[0] + gq[4] + gq[8];
      e2 += im.basis.wq * eq.squaredNorm();
      g2 += im.basis.wq * gq.squaredNorm();
      d2 += im.basis.wq * div * div;
      rep.max_grad = std::max(rep.max_grad, gq.norm());
      rep.max_e_excess = std::max(rep.max_e_excess, eq.norm() - gq.norm());
      rep.max_div_excess = std::max(rep.max_div_excess, std::abs(div) - std::sqrt(3.0) * gq.norm());
    }
  }
  rep.e_norm = std::sqrt(e2);
  rep.grad_norm = std::sqrt(g2);
  rep.div_norm = std::sqrt(d2);
  return rep;
}

double EmbeddedSolver::mean_load_energy(const SymMat& sigma) const {
  return impl_->load_energy_scale(sigma.mandel()) / ball_volume();
}

Vec3 EmbeddedSolver::node_position(int ix, int iy, int iz) const {
  const Impl& im = *impl_;
  return Vec3(-im.L + ix * im.h, -im.L + iy * im.h, -im.L + iz * im.h);
}

double EmbeddedSolver::max_gauss_strain(const Eigen::VectorXd& nodal) const {
  const Impl& im = *impl_;
  double m = 0.0;
  std::int64_t ids[8];
  Vec24 u;
  for (std::int64_t e = 0; e < im.elem_count(); ++e) {
    im.element_nodes(e, ids);
    for (int l = 0; l < 8; ++l) u.segment<3>(3 * l) = nodal.segment<3>(3 * ids[l]);
    for (int q = 0; q < 8; ++q) m = std::max(m, (im.basis.B[q] * u).norm());
  }
  return m;
}

DiscreteDisplacement solve_embedded(const VoxelField& field, const ElasticTensor& exterior,
                                    const SymMat& sigma, const SolverConfig& cfg, SolveStats* stats) {
  return EmbeddedSolver(field, exterior, cfg).solve(sigma, stats);
}

double energy_primal(const VoxelField& field, const ElasticTensor& exterior, const SymMat& sigma,
                     const DiscreteDisplacement& w, const SolverConfig& cfg) {
  return EmbeddedSolver(field, exterior, cfg).energy_primal(sigma, w);
}

double energy_flux(const VoxelField& field, const ElasticTensor& exterior, const SymMat& sigma,
                   const DiscreteDisplacement& w, const SolverConfig& cfg) {
  return EmbeddedSolver(field, exterior, cfg).energy_flux(sigma, w);
}

SymMat flux_average(const VoxelField& field, const SymMat& sigma, const DiscreteDisplacement& w,
                    const SolverConfig& cfg) {
  // The exterior tensor does not enter the ball-average of the flux; any
  // in-band value builds the same operator geometry.
  const ElasticTensor ext = iso_to_full(IsoModuli(field.band().alpha, field.band().alpha / 2.0));
  return EmbeddedSolver(field, ext, cfg).flux_average(sigma, w);
}

// ---------------------------------------------------------------------------
// Periodic reference solver on the unit cell.

namespace {

struct PeriodicOperator {
  int nx = 0;
  double h = 0.0;
  ElementBasis basis{1.0};
  Palette palette;
  std::vector<Mat24> Ke;
  std::vector<std::int32_t> elem_pal;
  std::array<std::vector<std::int32_t>, 8> colors;
  Eigen::VectorXd diag;

  std::int64_t elem_count() const { return static_cast<std::int64_t>(nx) * nx * nx; }
  std::int64_t node_count() const { return elem_count(); }  // wrapped grid

  inline std::int64_t node_id(int ix, int iy, int iz) const {
    ix = (ix == nx) ? 0 : ix;
    iy = (iy == nx) ? 0 : iy;
    iz = (iz == nx) ? 0 : iz;
    return ix + static_cast<std::int64_t>(nx) * (iy + static_cast<std::int64_t>(nx) * iz);
  }

  inline void element_nodes(std::int64_t e, std::int64_t ids[8]) const {
    const int i = static_cast<int>(e % nx);
    const int j = static_cast<int>((e / nx) % nx);
    const int k = static_cast<int>(e / (static_cast<std::int64_t>(nx) * nx));
    for (int l = 0; l < 8; ++l) {
      int di, dj, dk;
      corner(l, di, dj, dk);
      ids[l] = node_id(i + di, j + dj, k + dk);
    }
  }

  void zero_pinned(Eigen::VectorXd& v) const { v.segment<3>(0).setZero(); }

  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y.setZero();
    for (const auto& group : colors) {
      parallel_for_chunks(static_cast<std::int64_t>(group.size()), [&](std::int64_t lo, std::int64_t hi) {
        std::int64_t ids[8];
        Vec24 u, f;
        for (std::int64_t idx = lo; idx < hi; ++idx) {
          const std::int64_t e = group[idx];
          element_nodes(e, ids);
          for (int l = 0; l < 8; ++l) u.segment<3>(3 * l) = x.segment<3>(3 * ids[l]);
          f.noalias() = Ke[elem_pal[e]] * u;
          for (int l = 0; l < 8; ++l) y.segment<3>(3 * ids[l]) += f.segment<3>(3 * l);
        }
      });
    }
    zero_pinned(y);
  }
};

}  // namespace

PeriodicSolution solve_periodic(const VoxelField& cellfield, const SymMat& sigma, const SolverConfig& cfg) {
  PeriodicOperator op;
  const int n = cellfield.n();
  if (cfg.nx % n != 0 || cfg.nx < n || cfg.nx % 2 != 0)
    throw std::invalid_argument("solve_periodic: nx must be an even positive multiple of the voxel count");
  op.nx = cfg.nx;
  op.h = 2.0 / cfg.nx;
  op.basis = ElementBasis(op.h);
  const int per_voxel = cfg.nx / n;

  op.elem_pal.assign(op.elem_count(), 0);
  std::int64_t e = 0;
  for (int k = 0; k < op.nx; ++k)
    for (int j = 0; j < op.nx; ++j)
      for (int i = 0; i < op.nx; ++i, ++e) {
        op.elem_pal[e] = op.palette.intern(cellfield.cell(i / per_voxel, j / per_voxel, k / per_voxel).mandel());
        op.colors[(i & 1) | ((j & 1) << 1) | ((k & 1) << 2)].push_back(e);
      }

  op.Ke.reserve(op.palette.tensors.size());
  for (const auto& C : op.palette.tensors) op.Ke.push_back(op.basis.stiffness(C));

  const std::int64_t ndof = 3 * op.node_count();
  op.diag.setZero(ndof);
  {
    std::int64_t ids[8];
    for (std::int64_t el = 0; el < op.elem_count(); ++el) {
      op.element_nodes(el, ids);
      const Mat24& K = op.Ke[op.elem_pal[el]];
      for (int l = 0; l < 8; ++l) op.diag.segment<3>(3 * ids[l]) += K.diagonal().segment<3>(3 * l);
    }
    op.diag.segment<3>(0).setOnes();
  }

  const Vec6 s = sigma.mandel();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(ndof);
  double scale = 0.0;
  {
    std::int64_t ids[8];
    for (std::int64_t el = 0; el < op.elem_count(); ++el) {
      const Mat6& C = op.palette.tensors[op.elem_pal[el]];
      const Vec24 f = -op.basis.wq * (op.basis.Bsum.transpose() * (C * s));
      op.element_nodes(el, ids);
      for (int l = 0; l < 8; ++l) b.segment<3>(3 * ids[l]) += f.segment<3>(3 * l);
      scale += 8.0 * op.basis.wq * s.dot(C * s);
    }
    op.zero_pinned(b);
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(ndof);
  SolveStats stats;
  const double bnorm = b.norm();
  if (bnorm > 0.0) {
    const bool use_diag = cfg.preconditioner == SolverConfig::Precond::diagonal;
    Eigen::VectorXd r = b, z(ndof), p(ndof), q(ndof);
    z = use_diag ? (r.array() / op.diag.array()).matrix() : r;
    p = z;
    double rz = r.dot(z);
    int it = 0;
    double rel = 1.0;
    bool ok = false;
    while (it < cfg.cg_max_iter) {
      op.apply(p, q);
      const double alpha = rz / p.dot(q);
      x += alpha * p;
      r -= alpha * q;
      ++it;
      rel = r.norm() / bnorm;
      if (rel <= cfg.cg_tol && std::abs(r.dot(x)) <= cfg.cg_tol * scale) {
        ok = true;
        break;
      }
      z = use_diag ? (r.array() / op.diag.array()).matrix() : r;
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
    if (!ok) throw SolverError("periodic CG did not converge: rel residual " + std::to_string(rel), rel);
    stats = {it, rel, std::abs(r.dot(x)) / scale};
  }

  PeriodicSolution sol;
  sol.stats = stats;
  sol.w.nodes_per_axis = op.nx;
  sol.w.h = op.h;
  sol.w.origin = -1.0;
  sol.w.periodic = true;

  Vec3 mean = Vec3::Zero();
  for (std::int64_t nid = 0; nid < op.node_count(); ++nid) mean += x.segment<3>(3 * nid);
  sol.w.mean_shift = mean / static_cast<double>(op.node_count());
  sol.w.raw = std::move(x);

  Vec6 flux = Vec6::Zero();
  {
    std::int64_t ids[8];
    Vec24 u;
    for (std::int64_t el = 0; el < op.elem_count(); ++el) {
      const Mat6& C = op.palette.tensors[op.elem_pal[el]];
      op.element_nodes(el, ids);
      for (int l = 0; l < 8; ++l) u.segment<3>(3 * l) = sol.w.raw.segment<3>(3 * ids[l]);
      flux += 8.0 * op.basis.wq * (C * s);
      flux += op.basis.wq * (C * (op.basis.Bsum * u));
    }
  }
  sol.flux = SymMat::from_mandel(flux / 8.0);
  return sol;
}

ElasticTensor periodic_reference_tensor(const VoxelField& cellfield, const SolverConfig& cfg) {
  Mat6 a;
  for (int c = 0; c < 6; ++c) {
    Vec6 unit = Vec6::Zero();
    unit[c] = 1.0;
    const PeriodicSolution sol = solve_periodic(cellfield, SymMat::from_mandel(unit), cfg);
    a.col(c) = sol.flux.mandel();
  }
  // Columns come from independent solves; symmetrize away the CG-level
  // asymmetry before constructing the tensor.
  return ElasticTensor(0.5 * (a + a.transpose()));
}

}  // namespace homog
