#include <doctest.h>

#include <cmath>

#include "homog/microstructure.hpp"

using namespace homog;

namespace {

GeneratorSpec two_phase_spec(int n, std::uint64_t seed, double p = 0.5) {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::two_phase_voxel;
  spec.n = n;
  spec.seed = seed;
  spec.phase1 = IsoModuli(1.2, 0.6);
  spec.phase2 = IsoModuli(3.8, 1.9);
  spec.volume_fraction = p;
  spec.band = EllipticityBand(1.0, 4.0);
  return spec;
}

bool is_phase2(const VoxelField& f, const GeneratorSpec& spec, int i, int j, int k) {
  return (f.cell(i, j, k).mandel() - iso_to_full(*spec.phase2).mandel()).norm() <
         (f.cell(i, j, k).mandel() - iso_to_full(spec.phase1).mandel()).norm();
}

}  // namespace

TEST_CASE("constant generator fills every voxel with phase1") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::constant;
  spec.n = 4;
  spec.phase1 = IsoModuli(2.0, 1.0);
  spec.band = EllipticityBand(1.0, 4.0);
  const VoxelField f = generate(spec);
  for (const auto& c : f.cells())
    CHECK((c.mandel() - iso_to_full(spec.phase1).mandel()).norm() == 0.0);
}

TEST_CASE("phases outside the band are rejected") {
  GeneratorSpec spec = two_phase_spec(4, 1);
  spec.phase2 = IsoModuli(9.0, 1.0);
  CHECK_THROWS_AS(generate(spec), std::domain_error);
}

TEST_CASE("determinism: same seed gives bit-identical fields") {
  const GeneratorSpec spec = two_phase_spec(8, 42);
  const VoxelField a = generate(spec), b = generate(spec);
  for (size_t v = 0; v < a.cells().size(); ++v)
    CHECK((a.cells()[v].mandel() - b.cells()[v].mandel()).norm() == 0.0);

  GeneratorSpec other = spec;
  other.seed = 43;
  const VoxelField c = generate(other);
  int diff = 0;
  for (size_t v = 0; v < a.cells().size(); ++v)
    if ((a.cells()[v].mandel() - c.cells()[v].mandel()).norm() != 0.0) ++diff;
  CHECK(diff > 0);
}

TEST_CASE("two-phase volume fraction within the binomial 3-sigma bound") {
  const int n = 12;
  const double p = 0.5;
  const GeneratorSpec spec = two_phase_spec(n, 7, p);
  const VoxelField f = generate(spec);
  int count = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (is_phase2(f, spec, i, j, k)) ++count;
  const double total = n * n * n;
  const double sigma = std::sqrt(p * (1 - p) * total);
  CHECK(std::abs(count - p * total) <= 3.0 * sigma);
}

TEST_CASE("two-point axis correlations agree across the three axes") {
  const int n = 16;
  const GeneratorSpec spec = two_phase_spec(n, 12345);
  const VoxelField f = generate(spec);
  // fraction of equal-phase neighbor pairs along each axis, lag 1
  double match[3] = {0, 0, 0};
  int pairs = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const bool c = is_phase2(f, spec, i, j, k);
        match[0] += c == is_phase2(f, spec, (i + 1) % n, j, k);
        match[1] += c == is_phase2(f, spec, i, (j + 1) % n, k);
        match[2] += c == is_phase2(f, spec, i, j, (k + 1) % n);
        ++pairs;
      }
  // iid voxels: expectation 0.5 per axis, sampling noise ~ 1/(2 sqrt(pairs))
  const double noise = 4.0 / (2.0 * std::sqrt(static_cast<double>(pairs)));
  for (int a = 0; a < 3; ++a) CHECK(std::abs(match[a] / pairs - 0.5) <= noise);
}

TEST_CASE("laminate layers alternate along the chosen axis") {
  GeneratorSpec spec = two_phase_spec(8, 0);
  spec.kind = GeneratorKind::laminate;
  spec.axis = 2;
  spec.count = 2;  // two periods across [-1,1]
  const VoxelField f = generate(spec);
  // within a period of 4 voxels, the first half is phase2 (fraction 0.5)
  for (int j = 0; j < 8; ++j) {
    const bool expect_phase2 = (j % 4) < 2;
    CHECK(is_phase2(f, spec, 3, j, 5) == expect_phase2);
  }
  // constant in the other axes
  CHECK(is_phase2(f, spec, 0, 1, 0) == is_phase2(f, spec, 7, 1, 3));
}

TEST_CASE("sphere inclusions stay disjoint and in range; packing failure throws") {
  GeneratorSpec spec = two_phase_spec(16, 3);
  spec.kind = GeneratorKind::sphere_inclusions;
  spec.radius = 0.3;
  spec.count = 4;
  const VoxelField f = generate(spec);
  int inclusion_voxels = 0;
  for (const auto& c : f.cells())
    if ((c.mandel() - iso_to_full(*spec.phase2).mandel()).norm() <
        (c.mandel() - iso_to_full(spec.phase1).mandel()).norm())
      ++inclusion_voxels;
  // 4 balls of radius 0.3 occupy ~4.5% of the cube each
  CHECK(inclusion_voxels > 0);
  CHECK(inclusion_voxels < 16 * 16 * 16 / 2);

  GeneratorSpec impossible = spec;
  impossible.radius = 0.45;
  impossible.count = 30;  // cannot pack 30 disjoint balls of this size
  CHECK_THROWS_AS(generate(impossible), std::runtime_error);
}

TEST_CASE("rescale: identity at N=1, tiling at N=2, fractions preserved") {
  const GeneratorSpec spec = two_phase_spec(6, 9);
  const VoxelField f = generate(spec);
  const VoxelField f1 = rescale(f, 1);
  for (size_t v = 0; v < f.cells().size(); ++v)
    CHECK((f.cells()[v].mandel() - f1.cells()[v].mandel()).norm() == 0.0);

  const VoxelField f2 = rescale(f, 2);
  CHECK(f2.n() == 12);
  // exact periodic tiling: output voxel (i,j,k) = input voxel (i%6, j%6, k%6)
  for (int k = 0; k < 12; k += 5)
    for (int j = 0; j < 12; j += 3)
      for (int i = 0; i < 12; ++i)
        CHECK((f2.cell(i, j, k).mandel() - f.cell(i % 6, j % 6, k % 6).mandel()).norm() == 0.0);

  // volume fraction exactly preserved
  int c1 = 0, c2 = 0;
  for (const auto& c : f.cells())
    if ((c.mandel() - iso_to_full(*spec.phase2).mandel()).norm() < 1e-9) ++c1;
  for (const auto& c : f2.cells())
    if ((c.mandel() - iso_to_full(*spec.phase2).mandel()).norm() < 1e-9) ++c2;
  CHECK(c2 == 8 * c1);
}

TEST_CASE("rescale: laminate layer count doubles at N=2") {
  GeneratorSpec spec = two_phase_spec(8, 0);
  spec.kind = GeneratorKind::laminate;
  spec.axis = 1;
  spec.count = 1;
  const VoxelField f = generate(spec);
  const VoxelField f2 = rescale(f, 2);
  // count phase transitions along x
  const auto transitions = [&](const VoxelField& field, const GeneratorSpec& s) {
    int t = 0;
    const int n = field.n();
    for (int i = 0; i < n; ++i)
      if (is_phase2(field, s, i, 0, 0) != is_phase2(field, s, (i + 1) % n, 0, 0)) ++t;
    return t;
  };
  CHECK(transitions(f2, spec) == 2 * transitions(f, spec));
}

TEST_CASE("rescale capacity error") {
  const GeneratorSpec spec = two_phase_spec(8, 1);
  const VoxelField f = generate(spec);
  CHECK_THROWS_AS(rescale(f, 1000), std::length_error);
}

TEST_CASE("spec serialization names every generator parameter") {
  const GeneratorSpec spec = two_phase_spec(8, 42);
  const std::string text = spec_to_text(spec);
  CHECK(text.find("kind=two_phase_voxel") != std::string::npos);
  CHECK(text.find("n=8") != std::string::npos);
  CHECK(text.find("seed=42") != std::string::npos);
  CHECK(text.find("phase2=3.79999") != std::string::npos);  // 17-digit exact print
  CHECK(text.find("band=1,4") != std::string::npos);
  CHECK(text.find('\n') == std::string::npos);  // single sidecar line
}

TEST_CASE("all generated tensors are isotropic members of the band") {
  const GeneratorSpec spec = two_phase_spec(8, 5);
  const VoxelField f = generate(spec);
  for (const auto& c : f.cells()) {
    CHECK(is_isotropic(c));
    CHECK(in_class_M(c, spec.band));
  }
}
