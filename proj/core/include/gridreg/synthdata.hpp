#pragma once

#include "gridreg/grid.hpp"
#include "gridreg/metrics.hpp"

namespace gridreg {

struct SyntheticScene {
  Tensor image;  // [1, spatial...], intensities in [0,1]
  LabelVolume labels;
  SamplingGrid ground_truth;  // defined only for generated pairs
};

// Sum of compactly supported radial bumps; label k+1 on bump k's support
// (nearest bump wins on overlap). Deterministic per seed.
SyntheticScene make_blob_scene(std::uint64_t seed,
                               const std::vector<int>& extents, int n_blobs);

// Identity plus separable sinusoidal displacement, amplitude in voxels.
// The per-axis derivative bound amplitude*pi*frequency/(d_a-1) < 1 keeps
// the analytic Jacobian determinant positive everywhere; violating it is
// a contract error.
SamplingGrid make_smooth_deformation(std::uint64_t seed,
                                     const std::vector<int>& extents,
                                     double amplitude, double frequency);

// Analytic Jacobian determinant field of a deformation produced by
// make_smooth_deformation with the same arguments.
Tensor analytic_deformation_jacobian(std::uint64_t seed,
                                     const std::vector<int>& extents,
                                     double amplitude, double frequency);

struct RegistrationPair {
  Tensor fixed;
  Tensor moving;
  LabelVolume fixed_labels;
  LabelVolume moving_labels;
  SamplingGrid ground_truth;  // maps fixed coordinates into moving
};

// moving = scene; fixed = scene sampled through the deformation, so
// I_f(x) = I_m(G(x)) holds by construction and registering moving to
// fixed should recover G.
RegistrationPair make_pair(const SyntheticScene& scene,
                           const SamplingGrid& deformation);

}  // namespace gridreg
