#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gridreg/grid.hpp"
#include "gridreg/ops.hpp"
#include "gridreg/synthdata.hpp"
#include "test_util.hpp"

using namespace gridreg;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

// A smooth random grid rescaled to stay strictly inside [-1, 1]; border
// clamping in grid_sample would otherwise break exact algebraic identities
// like compose neutrality near the volume boundary.
SamplingGrid random_smooth_grid(std::uint64_t seed,
                                const std::vector<int>& extents,
                                double amplitude = 1.0) {
  SamplingGrid g = make_smooth_deformation(seed, extents, amplitude, 1.0);
  float peak = 0.0f;
  for (std::int64_t i = 0; i < g.values.size(); ++i)
    peak = std::max(peak, std::abs(g.values.data()[i]));
  const float s = 0.95f / std::max(peak, 1.0f);
  for (std::int64_t i = 0; i < g.values.size(); ++i)
    g.values.data()[i] *= s;
  return g;
}

}  // namespace

TEST_CASE("identity_grid: endpoints, midpoint, corners") {
  SamplingGrid g1 = identity_grid({3});
  CHECK(g1.values.data()[0] == doctest::Approx(-1.0f));
  CHECK(g1.values.data()[1] == doctest::Approx(0.0f));
  CHECK(g1.values.data()[2] == doctest::Approx(1.0f));

  SamplingGrid g2 = identity_grid({2, 2});
  const float* v = g2.values.data();
  // Channel 0 (axis-0 coordinate) then channel 1, row-major voxels.
  CHECK(v[0] == -1.0f);  // (0,0) axis 0
  CHECK(v[1] == -1.0f);  // (0,1) axis 0
  CHECK(v[2] == 1.0f);   // (1,0) axis 0
  CHECK(v[4] == -1.0f);  // (0,0) axis 1
  CHECK(v[5] == 1.0f);   // (0,1) axis 1
  CHECK(v[7] == 1.0f);   // (1,1) axis 1
}

TEST_CASE("identity_grid: extent 1 is a contract violation") {
  CHECK_THROWS_AS(identity_grid({1, 4}), contract_error);
}

TEST_CASE("compose: identity is a two-sided neutral element") {
  SamplingGrid g = random_smooth_grid(21, {6, 7});
  SamplingGrid eye = identity_grid({6, 7});
  CHECK(max_abs_diff(compose(eye, g).values, g.values) < 1e-6);
  CHECK(max_abs_diff(compose(g, eye).values, g.values) < 1e-6);
}

TEST_CASE("compose: N mismatch is a contract violation") {
  SamplingGrid a = identity_grid({4, 4});
  SamplingGrid b = identity_grid({4, 4, 4});
  CHECK_THROWS_AS(compose(a, b), contract_error);
}

TEST_CASE("compose: matches the warp-twice oracle on smooth inputs") {
  // Warping once by compose(A, B) and warping twice differ only by the
  // interpolation error of the intermediate resampled image, so use a
  // smooth (bounded-curvature) intensity pattern rather than hard edges.
  const int d = 17;
  SamplingGrid a = random_smooth_grid(22, {d, d, d}, 0.5);
  SamplingGrid b = random_smooth_grid(23, {d, d, d}, 0.5);
  Tensor image = Tensor::zeros({1, d, d, d});
  for (int z = 0; z < d; ++z)
    for (int y = 0; y < d; ++y)
      for (int x = 0; x < d; ++x)
        image.data()[(z * d + y) * d + x] =
            std::sin(3.14159f * z / (d - 1)) *
            std::sin(3.14159f * y / (d - 1)) *
            std::sin(3.14159f * x / (d - 1));
  Tensor once = grid_sample(image, compose(a, b).values);
  Tensor twice = grid_sample(grid_sample(image, a.values), b.values);
  CHECK(max_abs_diff(once, twice) < 2e-2);
}

TEST_CASE("to_displacement / from_displacement") {
  SamplingGrid eye = identity_grid({5, 4});
  Tensor zero = to_displacement(eye);
  for (std::int64_t i = 0; i < zero.size(); ++i) CHECK(zero.data()[i] == 0.0f);

  // Shift of +2/(d-1) normalized along axis 0 is exactly +1 voxel.
  SamplingGrid shifted = identity_grid({5, 4});
  const std::int64_t vox = spatial_size(shifted.values.shape());
  for (std::int64_t i = 0; i < vox; ++i)
    shifted.values.data()[i] += 2.0f / (5 - 1);
  Tensor disp = to_displacement(shifted);
  for (std::int64_t i = 0; i < vox; ++i) {
    CHECK(disp.data()[i] == doctest::Approx(1.0f));
    CHECK(disp.data()[vox + i] == doctest::Approx(0.0f));
  }

  SamplingGrid g = random_smooth_grid(25, {6, 6});
  CHECK(max_abs_diff(from_displacement(to_displacement(g)).values, g.values) <
        1e-6);
}

TEST_CASE("jacobian_determinants: identity and uniform scaling") {
  Tensor det = jacobian_determinants(identity_grid({5, 5, 5}));
  for (std::int64_t i = 0; i < det.size(); ++i)
    CHECK(det.data()[i] == doctest::Approx(1.0f));

  // Uniform scaling by s in voxel units: det = s^N in the interior.
  const float s = 0.5f;
  SamplingGrid scaled = identity_grid({7, 7});
  for (std::int64_t i = 0; i < scaled.values.size(); ++i)
    scaled.values.data()[i] *= s;
  Tensor det2 = jacobian_determinants(scaled);
  for (int i = 1; i < 6; ++i)
    for (int j = 1; j < 6; ++j)
      CHECK(det2.data()[i * 7 + j] == doctest::Approx(s * s));
}

TEST_CASE("jacobian_determinants: matches an independent stencil oracle") {
  SamplingGrid g = random_smooth_grid(26, {9, 9, 9});
  Tensor det = jacobian_determinants(g);

  const int d = 9;
  const float* v = g.values.data();
  const std::int64_t vox = d * d * d;
  auto coord = [&](int a, int z, int y, int x) {
    // De-normalized voxel-unit coordinate.
    return (v[a * vox + (z * d + y) * d + x] + 1.0f) * 0.5f * (d - 1);
  };
  auto deriv = [&](int a, int axis, int z, int y, int x) {
    int p[3] = {z, y, x}, m[3] = {z, y, x};
    float h = 2.0f;
    if (p[axis] + 1 > d - 1 || m[axis] - 1 < 0) h = 1.0f;
    p[axis] = std::min(p[axis] + 1, d - 1);
    m[axis] = std::max(m[axis] - 1, 0);
    return (coord(a, p[0], p[1], p[2]) - coord(a, m[0], m[1], m[2])) / h;
  };
  for (int z = 0; z < d; ++z)
    for (int y = 0; y < d; ++y)
      for (int x = 0; x < d; ++x) {
        float J[3][3];
        for (int a = 0; a < 3; ++a)
          for (int ax = 0; ax < 3; ++ax) J[a][ax] = deriv(a, ax, z, y, x);
        const float want = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                           J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                           J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
        CHECK(det.data()[(z * d + y) * d + x] == doctest::Approx(want));
      }
}

TEST_CASE("neg_jacobian_stats: identity, orientation flip, recount") {
  NegJacobianStats eye = neg_jacobian_stats(identity_grid({6, 6}));
  CHECK(eye.count == 0);
  CHECK(eye.fraction == 0.0);

  SamplingGrid flipped = identity_grid({6, 6});
  for (std::int64_t i = 0; i < spatial_size(flipped.values.shape()); ++i)
    flipped.values.data()[i] *= -1.0f;
  NegJacobianStats neg = neg_jacobian_stats(flipped);
  CHECK(neg.count == 36);  // constant negative determinant everywhere

  SamplingGrid g = random_smooth_grid(27, {8, 8}, 2.2);
  Tensor det = jacobian_determinants(g);
  std::int64_t count = 0;
  for (std::int64_t i = 0; i < det.size(); ++i)
    if (det.data()[i] < 0.0f) ++count;
  NegJacobianStats stats = neg_jacobian_stats(g);
  CHECK(stats.count == count);
  CHECK(stats.fraction ==
        doctest::Approx(static_cast<double>(count) / det.size()));
}

TEST_CASE("grid file round trip and format errors") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "t_grid_roundtrip.grid")
          .string();
  SamplingGrid g = random_smooth_grid(28, {5, 6});
  write_grid(g, path);
  SamplingGrid back = read_grid(path);
  CHECK(back.spatial() == g.spatial());
  CHECK(max_abs_diff(back.values, g.values) == 0.0);

  // Determinism: two writes produce byte-identical files.
  const std::string path2 =
      (std::filesystem::temp_directory_path() / "t_grid_roundtrip2.grid")
          .string();
  write_grid(g, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);

  // Truncation is an explicit format error.
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(b1.data(), 7);
  out.close();
  CHECK_THROWS_AS(read_grid(path), std::runtime_error);

  std::remove(path.c_str());
  std::remove(path2.c_str());
}
