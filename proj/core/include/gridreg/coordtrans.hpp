#pragma once

#include "gridreg/grid.hpp"
#include "gridreg/tensor.hpp"

namespace gridreg {

// Sinusoidal position code: channel pair (2i, 2i+1) at voxel x holds
// (cos x_i*pi/(d_i-1), sin x_i*pi/(d_i-1)). Dot products of two codes
// peak at zero offset, which is what makes self-match the default.
Tensor positional_embedding(const std::vector<int>& extents);

// sum_i cos(dx_i*pi/(d_i-1)); equals the dot product of the embeddings.
float pe_cross_correlation(const std::vector<int>& x1,
                           const std::vector<int>& x2,
                           const std::vector<int>& extents);

// Two zero-initialized conv heads plus a learnable scale on the position
// code. At initialization the feature branches contribute exactly zero.
//
// The second head (C -> 2N, added to the position code under alpha) is
// what lets training leave the zero initialization: a plain concatenated
// dot product separates into conv_f.conv_m + a^2 PE_f.PE_m, and at zero
// weights both factors of the first term vanish, so every weight gradient
// is exactly zero. Mixing features into the position channels creates
// conv_f.PE_m cross terms with nonzero gradients while the initial output
// is still exactly [0, PE].
struct PositionalEncodingParams {
  Tensor kernel;   // [C, C, k...]
  Tensor bias;     // [C]
  Tensor kernel2;  // [2N, C, k...]
  Tensor bias2;    // [2N]
  Tensor alpha;    // scalar, initialized to 1
};

PositionalEncodingParams make_pe_params(int channels, int nspatial,
                                        int kernel_size = 3);

// concat(conv(features), alpha * (conv2(features) + positional_embedding)).
Tensor encode(const Tensor& features, const PositionalEncodingParams& params);

// Per-axis half-widths of the candidate neighborhood; candidates clamp to
// the volume so K = prod(2*h_i + 1) is constant everywhere.
struct SearchWindow {
  std::vector<int> half;

  std::int64_t candidate_count() const {
    std::int64_t k = 1;
    for (int h : half) k *= 2 * h + 1;
    return k;
  }
};

// Full attention over every voxel: softmax(F M^T) G_I. Materializes the
// P x P score matrix; desk-scale inputs only (O(P^2) memory).
SamplingGrid coordinate_translator_dense(const Tensor& f_enc,
                                         const Tensor& m_enc);

// Attention restricted to a clamped window around each voxel.
SamplingGrid coordinate_translator_windowed(const Tensor& f_enc,
                                            const Tensor& m_enc,
                                            const SearchWindow& window);

}  // namespace gridreg
