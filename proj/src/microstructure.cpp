#include "homog/microstructure.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace homog {

namespace {

constexpr int kMaxResolution = 512;

// SplitMix64 finalizer; the counter stream is splitmix(seed ^ golden*ctr).
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform01(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t z = splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * (counter + 1)));
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

}  // namespace

std::string generator_name(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::constant: return "constant";
    case GeneratorKind::two_phase_voxel: return "two_phase_voxel";
    case GeneratorKind::sphere_inclusions: return "sphere_inclusions";
    case GeneratorKind::laminate: return "laminate";
  }
  return "unknown";
}

std::string spec_to_text(const GeneratorSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << "kind=" << generator_name(spec.kind) << "; n=" << spec.n << "; seed=" << spec.seed
     << "; phase1=" << spec.phase1.kappa << "," << spec.phase1.mu;
  if (spec.phase2) os << "; phase2=" << spec.phase2->kappa << "," << spec.phase2->mu;
  os << "; volume_fraction=" << spec.volume_fraction << "; radius=" << spec.radius
     << "; count=" << spec.count << "; axis=" << spec.axis << "; band=" << spec.band.alpha << ","
     << spec.band.beta << "," << spec.band.alpha_minus << "," << spec.band.beta_plus;
  return os.str();
}

VoxelField generate(const GeneratorSpec& spec) {
  if (spec.n < 1 || spec.n > kMaxResolution)
    throw std::invalid_argument("generate: voxel resolution out of range");
  if (spec.volume_fraction < 0.0 || spec.volume_fraction > 1.0)
    throw std::invalid_argument("generate: volume fraction must lie in [0,1]");
  const ElasticTensor t1 = iso_to_full(spec.phase1);
  if (!in_class_M(t1, spec.band)) throw std::domain_error("generate: phase1 outside the band");
  ElasticTensor t2 = t1;
  if (spec.kind != GeneratorKind::constant) {
    if (!spec.phase2) throw std::invalid_argument("generate: two-phase generator needs phase2");
    t2 = iso_to_full(*spec.phase2);
    if (!in_class_M(t2, spec.band)) throw std::domain_error("generate: phase2 outside the band");
  }

  const int n = spec.n;
  const std::int64_t total = static_cast<std::int64_t>(n) * n * n;
  std::vector<ElasticTensor> cells(total, t1);

  auto center = [n](int i) { return -1.0 + (i + 0.5) * 2.0 / n; };

  switch (spec.kind) {
    case GeneratorKind::constant:
      break;

    case GeneratorKind::two_phase_voxel: {
      for (std::int64_t v = 0; v < total; ++v)
        if (uniform01(spec.seed, static_cast<std::uint64_t>(v)) < spec.volume_fraction) cells[v] = t2;
      break;
    }

    case GeneratorKind::sphere_inclusions: {
      if (spec.radius <= 0.0 || spec.radius >= 1.0)
        throw std::invalid_argument("generate: inclusion radius out of range");
      if (spec.count < 1) throw std::invalid_argument("generate: inclusion count must be positive");
      std::vector<Vec3> centers;
      std::uint64_t ctr = 0;
      const std::uint64_t budget = 1000ULL * static_cast<std::uint64_t>(spec.count);
      while (centers.size() < static_cast<size_t>(spec.count)) {
        if (ctr >= 3 * budget)
          throw std::runtime_error("generate: sphere packing failed within the retry budget");
        const double hx = 1.0 - spec.radius;
        const Vec3 c(hx * (2.0 * uniform01(spec.seed, ctr + 0) - 1.0),
                     hx * (2.0 * uniform01(spec.seed, ctr + 1) - 1.0),
                     hx * (2.0 * uniform01(spec.seed, ctr + 2) - 1.0));
        ctr += 3;
        bool clash = false;
        for (const auto& o : centers)
          if ((o - c).norm() < 2.0 * spec.radius) {
            clash = true;
            break;
          }
        if (!clash) centers.push_back(c);
      }
      std::int64_t v = 0;
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i, ++v) {
            const Vec3 x(center(i), center(j), center(k));
            for (const auto& c : centers)
              if ((x - c).norm() <= spec.radius) {
                cells[v] = t2;
                break;
              }
          }
      break;
    }

    case GeneratorKind::laminate: {
      if (spec.axis < 1 || spec.axis > 3) throw std::invalid_argument("generate: laminate axis in 1..3");
      if (spec.count < 1) throw std::invalid_argument("generate: laminate period count must be positive");
      const double period = 2.0 / spec.count;
      std::int64_t v = 0;
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i, ++v) {
            const double coords[3] = {center(i), center(j), center(k)};
            const double x = coords[spec.axis - 1] + 1.0;
            const double frac = x / period - std::floor(x / period);
            if (frac < spec.volume_fraction) cells[v] = t2;
          }
      break;
    }
  }

  return VoxelField(n, spec.band, std::move(cells));
}

VoxelField rescale(const VoxelField& field, int N) {
  if (N < 1) throw std::invalid_argument("rescale: N must be positive");
  const int n = field.n();
  if (static_cast<std::int64_t>(n) * N > kMaxResolution)
    throw std::length_error("rescale: N*n exceeds the resolution limit");
  if (N == 1) return field;

  const int m = n * N;
  std::vector<ElasticTensor> cells;
  cells.reserve(static_cast<std::int64_t>(m) * m * m);
  // Output voxel center x maps to the wrapped point N x; with m = N n the
  // input voxel index is simply the output index modulo n.
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) cells.push_back(field.cell(i % n, j % n, k % n));
  return VoxelField(m, field.band(), std::move(cells));
}

}  // namespace homog
