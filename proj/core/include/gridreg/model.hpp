#pragma once

#include <string>
#include <utility>

#include "gridreg/coordtrans.hpp"
#include "gridreg/encoder.hpp"
#include "gridreg/grid.hpp"

namespace gridreg {

enum class Variant { kFull, kLite };

struct ModelConfig {
  int levels = 3;
  int nspatial = 2;
  std::vector<int> channels = {8, 16, 32, 32, 32};
  // Search-window half-widths per level, finest first. Missing entries
  // default to 1 per axis.
  std::vector<SearchWindow> windows;
  int encoder_kernel = 3;
  int pe_kernel = 3;
  float leaky_slope = 0.2f;
  Variant variant = Variant::kLite;

  SearchWindow window_at(int level) const;
};

// Encoder weights plus one positional-encoding layer per pyramid level,
// shared between the fixed and moving branches.
struct Model {
  ModelConfig config;
  EncoderParams encoder;
  std::vector<PositionalEncodingParams> pe;  // finest first

  // Stable name -> tensor view of every learnable parameter.
  std::vector<std::pair<std::string, Tensor>> named_params() const;
};

Model init_model(std::uint64_t seed, const ModelConfig& config);

// Everything the forward pass produces, kept differentiable for the loss.
struct DecodeTrace {
  // Per level, finest first; level 0 is undefined for the lite variant.
  std::vector<SamplingGrid> level_grids;
  // Running composition after folding each level (same indexing).
  std::vector<SamplingGrid> composed;
  SamplingGrid full_grid;  // composed result at full resolution
  Tensor warped;           // moving image sampled at full_grid
};

DecodeTrace forward(const Tensor& fixed, const Tensor& moving,
                    const Model& model);

struct LossTerms {
  Tensor total;      // scalar, differentiable
  double similarity; // mean squared intensity difference
  double smoothness; // unweighted sum of squared grid-residual differences
};

// mean((I_f - I_w)^2) + lambda * sum_l sum_x |grad(G_l - G_I)|^2.
LossTerms loss(const DecodeTrace& trace, const Tensor& fixed, float lambda);

}  // namespace gridreg
