#include <cmath>

#include "doctest.h"
#include "gridreg/metrics.hpp"
#include "gridreg/ops.hpp"
#include "gridreg/synthdata.hpp"
#include "test_util.hpp"

using namespace gridreg;
using testutil::max_abs_diff;

TEST_CASE("make_blob_scene: zero blobs give an empty scene") {
  SyntheticScene s = make_blob_scene(120, {8, 8}, 0);
  for (std::int64_t i = 0; i < s.image.size(); ++i)
    CHECK(s.image.data()[i] == 0.0f);
  for (auto l : s.labels.labels) CHECK(l == 0);
}

TEST_CASE("make_blob_scene: deterministic per seed") {
  SyntheticScene a = make_blob_scene(121, {8, 8}, 4);
  SyntheticScene b = make_blob_scene(121, {8, 8}, 4);
  CHECK(max_abs_diff(a.image, b.image) == 0.0);
  CHECK(a.labels.labels == b.labels.labels);
  SyntheticScene c = make_blob_scene(122, {8, 8}, 4);
  CHECK(max_abs_diff(a.image, c.image) > 0.0);
}

TEST_CASE("make_blob_scene: intensity range and label/support consistency") {
  SyntheticScene s = make_blob_scene(123, {16, 16}, 5);
  bool any_fg = false;
  for (std::int64_t i = 0; i < s.image.size(); ++i) {
    CHECK(s.image.data()[i] >= 0.0f);
    CHECK(s.image.data()[i] <= 1.0f);
    // Labeled voxels carry intensity; a label implies bump support.
    if (s.labels.labels[i] != 0) {
      CHECK(s.image.data()[i] > 0.0f);
      any_fg = true;
    }
  }
  CHECK(any_fg);
  auto vocab = s.labels.vocabulary();
  CHECK(vocab.size() <= 5);
  for (auto l : vocab) CHECK(l >= 1);
}

TEST_CASE("make_smooth_deformation: amplitude 0 is the identity") {
  SamplingGrid g = make_smooth_deformation(124, {9, 9}, 0.0, 1.0);
  CHECK(max_abs_diff(g.values, identity_grid({9, 9}).values) < 1e-7);
}

TEST_CASE("make_smooth_deformation: in-bound fields never fold") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SamplingGrid g = make_smooth_deformation(seed, {12, 12}, 2.5, 1.0);
    NegJacobianStats stats = neg_jacobian_stats(g);
    CHECK(stats.count == 0);
    CHECK(stats.fraction == 0.0);
  }
}

TEST_CASE("make_smooth_deformation: amplitude bound is enforced by name") {
  try {
    make_smooth_deformation(125, {8, 8}, 5.0, 1.0);
    FAIL("expected a contract violation");
  } catch (const contract_error& e) {
    CHECK(std::string(e.what()).find("amplitude") != std::string::npos);
  }
}

TEST_CASE("analytic Jacobian matches the stencil evaluation within 0.05") {
  const std::vector<int> extents{16, 16};
  SamplingGrid g = make_smooth_deformation(126, extents, 2.0, 1.0);
  Tensor analytic = analytic_deformation_jacobian(126, extents, 2.0, 1.0);
  Tensor numeric = jacobian_determinants(g);
  // Interior only: boundary stencils are one-sided (first order).
  double worst = 0.0;
  for (int i = 1; i < 15; ++i)
    for (int j = 1; j < 15; ++j)
      worst = std::max(worst,
                       std::abs(static_cast<double>(analytic.data()[i * 16 + j]) -
                                numeric.data()[i * 16 + j]));
  CHECK(worst < 0.05);
}

TEST_CASE("make_pair: identity deformation gives identical images") {
  SyntheticScene s = make_blob_scene(127, {8, 8}, 3);
  RegistrationPair pair = make_pair(s, identity_grid({8, 8}));
  CHECK(max_abs_diff(pair.fixed, pair.moving) < 1e-6);
}

TEST_CASE("make_pair: warping moving by the truth grid recovers fixed") {
  SyntheticScene s = make_blob_scene(128, {16, 16}, 4);
  SamplingGrid warp = make_smooth_deformation(128, {16, 16}, 2.0, 1.0);
  RegistrationPair pair = make_pair(s, warp);
  Tensor rewarped = grid_sample(pair.moving, pair.ground_truth.values);
  double mse = 0.0;
  for (std::int64_t i = 0; i < rewarped.size(); ++i) {
    const double d = rewarped.data()[i] - pair.fixed.data()[i];
    mse += d * d;
  }
  CHECK(mse / rewarped.size() < 1e-3);
}

TEST_CASE("make_pair: truth-grid label warp beats identity on Dice") {
  SyntheticScene s = make_blob_scene(129, {32, 32}, 5);
  SamplingGrid warp = make_smooth_deformation(129, {32, 32}, 3.0, 1.0);
  RegistrationPair pair = make_pair(s, warp);
  auto vocab = pair.fixed_labels.vocabulary();
  const double with_truth =
      mean_dice(pair.fixed_labels,
                warp_labels(pair.moving_labels, pair.ground_truth), vocab)
          .mean;
  const double with_identity =
      mean_dice(pair.fixed_labels,
                warp_labels(pair.moving_labels, identity_grid({32, 32})),
                vocab)
          .mean;
  CHECK(with_truth > 0.98);
  CHECK(with_truth > with_identity);
}
