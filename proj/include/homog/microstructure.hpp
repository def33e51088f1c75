#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "homog/embedded_fem.hpp"
#include "homog/tensor.hpp"

namespace homog {

enum class GeneratorKind { constant, two_phase_voxel, sphere_inclusions, laminate };

/// Recipe for a reproducible isotropic two-phase field. Randomness comes
/// from a counter-based SplitMix64 stream over (seed, voxel index), so a
/// given spec is bit-stable across platforms and evaluation orders.
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::constant;
  int n = 8;                      // voxels per axis
  std::uint64_t seed = 0;
  IsoModuli phase1{1.0, 0.5};
  std::optional<IsoModuli> phase2;
  double volume_fraction = 0.5;   // two_phase_voxel: probability of phase2
  double radius = 0.25;           // sphere_inclusions
  int count = 4;                  // sphere_inclusions: spheres; laminate: periods
  int axis = 1;                   // laminate normal, 1-based
  EllipticityBand band{1.0, 2.0};
};

/// Deterministic voxel field from the spec; every voxel tensor is in the
/// band. Throws a packing error when sphere placement exceeds the retry
/// budget.
VoxelField generate(const GeneratorSpec& spec);

/// Field sampled at N-times finer feature scale: output voxel (at
/// resolution N n) takes the input value at the periodically wrapped point
/// N x. N = 1 is the identity. Throws a capacity error when N n exceeds
/// the resolution limit.
VoxelField rescale(const VoxelField& field, int N);

std::string generator_name(GeneratorKind kind);

/// Single-line key=value serialization of the spec, stored in the sidecar
/// next to generated field files.
std::string spec_to_text(const GeneratorSpec& spec);

}  // namespace homog
