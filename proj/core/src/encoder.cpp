#include "gridreg/encoder.hpp"

#include <cmath>

#include "gridreg/ops.hpp"

namespace gridreg {

namespace {

Tensor init_kernel(Rng& rng, int cout, int cin, int nsp, int k) {
  std::vector<int> shape{cout, cin};
  std::int64_t fan_in = cin;
  for (int a = 0; a < nsp; ++a) {
    shape.push_back(k);
    fan_in *= k;
  }
  const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
  std::int64_t n = cout * fan_in;
  std::vector<float> data(static_cast<size_t>(n));
  for (auto& v : data) v = rng.next_uniform(-bound, bound);
  return Tensor::from_data(std::move(shape), std::move(data),
                           /*requires_grad=*/true);
}

}  // namespace

EncoderParams init_encoder(std::uint64_t seed, const EncoderConfig& config) {
  require(config.levels >= 1, "init_encoder: at least one level");
  require(static_cast<int>(config.channels.size()) >= config.levels,
          "init_encoder: channel width needed per level");
  Rng rng(seed);
  EncoderParams p;
  p.config = config;
  int cin = 1;
  for (int l = 0; l < config.levels; ++l) {
    const int c = config.channels[l];
    std::vector<Tensor> level;
    level.push_back(init_kernel(rng, c, cin, config.nspatial, config.kernel_size));
    level.push_back(Tensor::zeros({c}, true));
    level.push_back(init_kernel(rng, c, c, config.nspatial, config.kernel_size));
    level.push_back(Tensor::zeros({c}, true));
    p.levels.push_back(std::move(level));
    cin = c;
  }
  return p;
}

FeaturePyramid extract(const Tensor& image, const EncoderParams& params) {
  const auto& cfg = params.config;
  require(image.rank() == cfg.nspatial + 1 && image.extent(0) == 1,
          "extract: image must be [1, spatial...]");
  const int div = 1 << (cfg.levels - 1);
  for (int d : spatial_shape(image.shape()))
    require(d % div == 0, "extract: extents must divide 2^(levels-1)");

  FeaturePyramid pyr;
  Tensor x = image;
  for (int l = 0; l < cfg.levels; ++l) {
    if (l > 0) x = avg_pool2(x);
    x = leaky_relu(conv(x, params.levels[l][0], params.levels[l][1]),
                   cfg.leaky_slope);
    x = leaky_relu(conv(x, params.levels[l][2], params.levels[l][3]),
                   cfg.leaky_slope);
    pyr.levels.push_back(x);
  }
  return pyr;
}

}  // namespace gridreg
