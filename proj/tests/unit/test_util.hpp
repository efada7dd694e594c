#pragma once

#include <cmath>
#include <vector>

#include "gridreg/encoder.hpp"
#include "gridreg/tensor.hpp"

namespace testutil {

inline gridreg::Tensor random_tensor(gridreg::Rng& rng, std::vector<int> shape,
                                     float lo = -1.0f, float hi = 1.0f,
                                     bool requires_grad = false) {
  gridreg::Tensor t = gridreg::Tensor::zeros(std::move(shape), requires_grad);
  for (std::int64_t i = 0; i < t.size(); ++i)
    t.data()[i] = rng.next_uniform(lo, hi);
  return t;
}

// Random grid with all coordinates strictly inside the volume so border
// clamping and interpolation-cell changes stay away from the samples.
inline gridreg::Tensor random_interior_grid(gridreg::Rng& rng,
                                            const std::vector<int>& extents) {
  std::vector<int> shape{static_cast<int>(extents.size())};
  for (int d : extents) shape.push_back(d);
  gridreg::Tensor g = gridreg::Tensor::zeros(std::move(shape));
  for (std::int64_t i = 0; i < g.size(); ++i)
    g.data()[i] = rng.next_uniform(-0.9f, 0.9f);
  return g;
}

inline double max_abs_diff(const gridreg::Tensor& a, const gridreg::Tensor& b) {
  double m = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  return m;
}

inline double max_abs_diff(const std::vector<float>& a,
                           const std::vector<float>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace testutil
