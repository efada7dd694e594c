#pragma once

#include <cstdint>

#include "gridreg/tensor.hpp"

namespace gridreg {

// Deterministic uniform floats in [0,1) from splitmix64 output; avoids
// the library-defined behavior of std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  float next_float() {  // [0, 1)
    return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f);
  }
  float next_uniform(float lo, float hi) {
    return lo + (hi - lo) * next_float();
  }
  bool next_bool() { return (next_u64() & 1) != 0; }

 private:
  std::uint64_t state_;
};

struct EncoderConfig {
  int levels = 3;
  std::vector<int> channels = {8, 16, 32, 32, 32};  // per level, finest first
  int kernel_size = 3;
  float leaky_slope = 0.2f;
  int nspatial = 2;
};

// Two conv+leaky_relu layers per level; levels below the first are fed
// through stride-2 average pooling. The same parameters serve both the
// fixed and the moving image.
struct EncoderParams {
  EncoderConfig config;
  // Per level: {kernel1, bias1, kernel2, bias2}.
  std::vector<std::vector<Tensor>> levels;
};

// Uniform init in +-1/sqrt(fan_in); deterministic per seed.
EncoderParams init_encoder(std::uint64_t seed, const EncoderConfig& config);

struct FeaturePyramid {
  std::vector<Tensor> levels;  // finest first; extents halve per level
};

// image is [1, spatial...]; extents must be divisible by 2^(levels-1).
FeaturePyramid extract(const Tensor& image, const EncoderParams& params);

}  // namespace gridreg
