#pragma once

#include "gridreg/tensor.hpp"

namespace gridreg {

// Elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float s);
// x * alpha where alpha is a (possibly learnable) scalar tensor.
Tensor scale_by(const Tensor& x, const Tensor& alpha);
Tensor leaky_relu(const Tensor& x, float slope);

// Reductions
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Layout: first axis is the channel axis, the rest are spatial.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// [C, spatial...] -> [P, C] with P = voxel count (row-major spatial order).
Tensor to_matrix(const Tensor& x);
// [P, N] -> [N, spatial...]; prod(spatial) must equal P.
Tensor from_matrix(const Tensor& x, const std::vector<int>& spatial);

// Dense linear algebra on rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& x);
Tensor softmax_rows(const Tensor& x);

// N-D cross-correlation, padding fixed at (k-1)/2 per axis so spatial
// extents are preserved. input [Cin, sp...], kernel [Cout, Cin, k...],
// bias [Cout].
Tensor conv(const Tensor& input, const Tensor& kernel, const Tensor& bias);

// Mean over each 2^N block; every spatial extent must be even.
Tensor avg_pool2(const Tensor& input);

// Multilinear sampling of input [C, in_sp...] at grid [N, out_sp...]
// coordinates in normalized [-1,1] units (+-1 at first/last voxel
// centers). Out-of-range coordinates clamp to the border. Differentiable
// w.r.t. both input and grid.
Tensor grid_sample(const Tensor& input, const Tensor& grid);

// Multilinear resize of [C, sp...] to the given spatial extents
// (normalized coordinates make this resolution-independent).
Tensor upsample_linear(const Tensor& input, const std::vector<int>& out_spatial);
// Nearest-neighbor upsample by 2 along every spatial axis.
Tensor upsample_nearest2(const Tensor& input);

// Sum over axes and channels of squared forward differences of x:
// sum_a sum_x |x(.,x+e_a) - x(.,x)|^2. Scalar result.
Tensor forward_diff_sq_sum(const Tensor& x);

// Data-only spatial flip (no gradient tracking); flip[a] selects axis a.
Tensor flip_spatial(const Tensor& x, const std::vector<bool>& flip);

// Row-major strides for a shape.
std::vector<std::int64_t> strides_of(const std::vector<int>& shape);

}  // namespace gridreg
