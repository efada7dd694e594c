#include "gridreg/synthdata.hpp"

#include <algorithm>
#include <cmath>

#include "gridreg/encoder.hpp"
#include "gridreg/ops.hpp"

namespace gridreg {

SyntheticScene make_blob_scene(std::uint64_t seed,
                               const std::vector<int>& extents, int n_blobs) {
  const int n = static_cast<int>(extents.size());
  require(n >= 1 && n <= 3, "make_blob_scene: 1-3 axes supported");
  require(n_blobs >= 0, "make_blob_scene: blob count must be non-negative");
  Rng rng(seed);

  int dmin = extents[0];
  for (int d : extents) dmin = std::min(dmin, d);

  struct Blob {
    double center[3];
    double radius;
    double amplitude;
  };
  std::vector<Blob> blobs;
  for (int k = 0; k < n_blobs; ++k) {
    Blob b{};
    for (int a = 0; a < n; ++a)
      b.center[a] = rng.next_uniform(0.2f, 0.8f) * (extents[a] - 1);
    b.radius = rng.next_uniform(0.12f, 0.20f) * (dmin - 1);
    b.amplitude = rng.next_uniform(0.6f, 1.0f);
    blobs.push_back(b);
  }

  const std::int64_t vox = [&] {
    std::int64_t v = 1;
    for (int d : extents) v *= d;
    return v;
  }();
  auto st = strides_of(extents);

  std::vector<float> img(static_cast<size_t>(vox), 0.0f);
  std::vector<std::int32_t> lab(static_cast<size_t>(vox), 0);
  for (std::int64_t j = 0; j < vox; ++j) {
    double total = 0.0, best = 0.0;
    int best_k = -1;
    for (size_t k = 0; k < blobs.size(); ++k) {
      double r2 = 0.0;
      for (int a = 0; a < n; ++a) {
        const double d =
            static_cast<double>((j / st[a]) % extents[a]) - blobs[k].center[a];
        r2 += d * d;
      }
      const double q = r2 / (blobs[k].radius * blobs[k].radius);
      if (q >= 1.0) continue;
      const double bump = blobs[k].amplitude * (1.0 - q) * (1.0 - q);
      total += bump;
      if (bump > best) {
        best = bump;
        best_k = static_cast<int>(k);
      }
    }
    img[j] = static_cast<float>(std::min(1.0, total));
    lab[j] = best_k >= 0 ? best_k + 1 : 0;
  }

  SyntheticScene scene;
  std::vector<int> shape{1};
  shape.insert(shape.end(), extents.begin(), extents.end());
  scene.image = Tensor::from_data(std::move(shape), std::move(img));
  scene.labels.extents = extents;
  scene.labels.labels = std::move(lab);
  return scene;
}

namespace {

struct SinusoidField {
  double amp[3];    // voxel units, per axis
  double phase[3];  // radians
};

SinusoidField draw_field(std::uint64_t seed, int n, double amplitude) {
  Rng rng(seed);
  SinusoidField f{};
  for (int a = 0; a < n; ++a) {
    f.amp[a] = amplitude * rng.next_uniform(0.5f, 1.0f);
    f.phase[a] = rng.next_uniform(0.0f, static_cast<float>(2.0 * M_PI));
  }
  return f;
}

}  // namespace

SamplingGrid make_smooth_deformation(std::uint64_t seed,
                                     const std::vector<int>& extents,
                                     double amplitude, double frequency) {
  const int n = static_cast<int>(extents.size());
  require(n >= 1 && n <= 3, "make_smooth_deformation: 1-3 axes supported");
  int dmin = extents[0];
  for (int d : extents) {
    require(d >= 2, "make_smooth_deformation: extents must be >= 2");
    dmin = std::min(dmin, d);
  }
  require(amplitude >= 0.0 && frequency > 0.0,
          "make_smooth_deformation: amplitude >= 0, frequency > 0 required");
  require(amplitude * M_PI * frequency / (dmin - 1) < 1.0,
          "make_smooth_deformation: amplitude*pi*frequency/min(d_i-1) must "
          "be < 1 to keep the Jacobian determinant positive");

  const SinusoidField f = draw_field(seed, n, amplitude);
  const std::int64_t vox = [&] {
    std::int64_t v = 1;
    for (int d : extents) v *= d;
    return v;
  }();
  auto st = strides_of(extents);
  std::vector<int> shape{n};
  shape.insert(shape.end(), extents.begin(), extents.end());
  std::vector<float> data(static_cast<size_t>(n) * vox);
  for (int a = 0; a < n; ++a) {
    const double w = M_PI * frequency / (extents[a] - 1);
    for (std::int64_t j = 0; j < vox; ++j) {
      const int xa = static_cast<int>((j / st[a]) % extents[a]);
      const double u = f.amp[a] * std::sin(w * xa + f.phase[a]);
      data[a * vox + j] =
          static_cast<float>(2.0 * (xa + u) / (extents[a] - 1) - 1.0);
    }
  }
  return {Tensor::from_data(std::move(shape), std::move(data))};
}

Tensor analytic_deformation_jacobian(std::uint64_t seed,
                                     const std::vector<int>& extents,
                                     double amplitude, double frequency) {
  const int n = static_cast<int>(extents.size());
  const SinusoidField f = draw_field(seed, n, amplitude);
  const std::int64_t vox = [&] {
    std::int64_t v = 1;
    for (int d : extents) v *= d;
    return v;
  }();
  auto st = strides_of(extents);
  std::vector<float> out(static_cast<size_t>(vox), 1.0f);
  for (int a = 0; a < n; ++a) {
    const double w = M_PI * frequency / (extents[a] - 1);
    for (std::int64_t j = 0; j < vox; ++j) {
      const int xa = static_cast<int>((j / st[a]) % extents[a]);
      out[j] *= static_cast<float>(1.0 + f.amp[a] * w *
                                             std::cos(w * xa + f.phase[a]));
    }
  }
  return Tensor::from_data(extents, std::move(out));
}

RegistrationPair make_pair(const SyntheticScene& scene,
                           const SamplingGrid& deformation) {
  require(spatial_shape(scene.image.shape()) == deformation.spatial(),
          "make_pair: shape mismatch");
  RegistrationPair pair;
  pair.moving = scene.image;
  pair.moving_labels = scene.labels;
  pair.fixed = grid_sample(scene.image, deformation.values);
  pair.fixed_labels = warp_labels(scene.labels, deformation);
  pair.ground_truth = deformation;
  return pair;
}

}  // namespace gridreg
