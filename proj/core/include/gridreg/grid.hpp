#pragma once

#include <string>

#include "gridreg/tensor.hpp"

namespace gridreg {

// An N-channel map of normalized [-1,1] coordinates: channel i at voxel x
// holds the coordinate (along spatial axis i) this voxel samples from.
// -1 and +1 address the centers of the first and last voxels.
struct SamplingGrid {
  Tensor values;  // [N, spatial...]

  int ndim() const { return values.extent(0); }
  std::vector<int> spatial() const { return spatial_shape(values.shape()); }
};

// G_I: channel i at voxel x holds 2*x_i/(d_i-1) - 1. Extents must be >= 2.
SamplingGrid identity_grid(const std::vector<int>& extents);

// Flat identity-grid coordinates as a [P, N] matrix (row-major voxels).
Tensor identity_grid_matrix(const std::vector<int>& extents);

// result(x) = outer interpolated at inner(x); shape follows inner.
// Differentiable w.r.t. both grids.
SamplingGrid compose(const SamplingGrid& outer, const SamplingGrid& inner);

// G - G_I in voxel units (channel i scaled by (d_i-1)/2).
Tensor to_displacement(const SamplingGrid& grid);
// Inverse of to_displacement.
SamplingGrid from_displacement(const Tensor& displacement);

// Per-voxel determinant of the Jacobian of the de-normalized (voxel-unit)
// mapping; central differences interior, one-sided at boundaries.
// Untracked output with the grid's spatial shape.
Tensor jacobian_determinants(const SamplingGrid& grid);

struct NegJacobianStats {
  std::int64_t count = 0;
  double fraction = 0.0;
};
NegJacobianStats neg_jacobian_stats(const SamplingGrid& grid);

// ".grid" file: magic "GRD1", u8 N, N x u32 LE extents, then N channels of
// float32 LE row-major normalized coordinates.
void write_grid(const SamplingGrid& grid, const std::string& path);
SamplingGrid read_grid(const std::string& path);

}  // namespace gridreg
