#include <cmath>

#include "doctest.h"
#include "gridreg/encoder.hpp"
#include "gridreg/ops.hpp"
#include "test_util.hpp"

using namespace gridreg;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_CASE("extract: L=1 is a single full-resolution conv block") {
  EncoderConfig cfg;
  cfg.levels = 1;
  cfg.channels = {4};
  cfg.nspatial = 2;
  EncoderParams p = init_encoder(40, cfg);
  Rng rng(41);
  Tensor img = random_tensor(rng, {1, 6, 6});
  FeaturePyramid pyr = extract(img, p);
  REQUIRE(pyr.levels.size() == 1);
  CHECK(pyr.levels[0].shape() == std::vector<int>{4, 6, 6});
}

TEST_CASE("extract: zero parameters give all-zero features") {
  EncoderConfig cfg;
  cfg.levels = 2;
  cfg.channels = {3, 5};
  cfg.nspatial = 2;
  EncoderParams p = init_encoder(42, cfg);
  for (auto& level : p.levels)
    for (auto& t : level)
      for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = 0.0f;
  Rng rng(43);
  FeaturePyramid pyr = extract(random_tensor(rng, {1, 8, 8}), p);
  for (const auto& f : pyr.levels)
    for (std::int64_t i = 0; i < f.size(); ++i) CHECK(f.data()[i] == 0.0f);
}

TEST_CASE("extract: level extents halve (32^3, L=5 -> 32,16,8,4,2)") {
  EncoderConfig cfg;
  cfg.levels = 5;
  cfg.channels = {2, 2, 2, 2, 2};
  cfg.nspatial = 3;
  EncoderParams p = init_encoder(44, cfg);
  Rng rng(45);
  FeaturePyramid pyr = extract(random_tensor(rng, {1, 32, 32, 32}), p);
  const int want[5] = {32, 16, 8, 4, 2};
  for (int l = 0; l < 5; ++l)
    CHECK(spatial_shape(pyr.levels[l].shape()) ==
          std::vector<int>(3, want[l]));
}

TEST_CASE("extract: indivisible extents are a contract violation") {
  EncoderConfig cfg;
  cfg.levels = 3;
  cfg.channels = {2, 2, 2};
  cfg.nspatial = 2;
  EncoderParams p = init_encoder(46, cfg);
  CHECK_THROWS_AS(extract(Tensor::zeros({1, 6, 8}), p), contract_error);
}

TEST_CASE("init_encoder: determinism and seed sensitivity") {
  EncoderConfig cfg;
  cfg.nspatial = 2;
  EncoderParams a = init_encoder(7, cfg);
  EncoderParams b = init_encoder(7, cfg);
  EncoderParams c = init_encoder(8, cfg);
  bool identical = true, differs = false;
  for (size_t l = 0; l < a.levels.size(); ++l)
    for (size_t t = 0; t < a.levels[l].size(); ++t)
      for (std::int64_t i = 0; i < a.levels[l][t].size(); ++i) {
        identical = identical &&
                    a.levels[l][t].data()[i] == b.levels[l][t].data()[i];
        differs = differs || a.levels[l][t].data()[i] != c.levels[l][t].data()[i];
      }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("init_encoder: weights respect the 1/sqrt(fan_in) bound") {
  // Second conv of a 3D level with 8 input channels and kernel 3:
  // fan_in = 27 * 8 = 216, bound 1/sqrt(216) ~ 0.068.
  EncoderConfig cfg;
  cfg.levels = 1;
  cfg.channels = {8};
  cfg.nspatial = 3;
  EncoderParams p = init_encoder(47, cfg);
  const Tensor& k2 = p.levels[0][2];  // [8, 8, 3, 3, 3]
  REQUIRE(k2.shape() == std::vector<int>{8, 8, 3, 3, 3});
  const float bound = 1.0f / std::sqrt(216.0f);
  CHECK(bound == doctest::Approx(0.068).epsilon(0.01));
  float mx = 0.0f;
  for (std::int64_t i = 0; i < k2.size(); ++i)
    mx = std::max(mx, std::abs(k2.data()[i]));
  CHECK(mx <= bound);
  CHECK(mx > 0.5f * bound);  // the distribution actually fills the range
}

TEST_CASE("siamese property: features depend only on image and params") {
  EncoderConfig cfg;
  cfg.levels = 2;
  cfg.channels = {3, 4};
  cfg.nspatial = 2;
  EncoderParams p = init_encoder(48, cfg);
  Rng rng(49);
  Tensor img = random_tensor(rng, {1, 8, 8});
  Tensor other = random_tensor(rng, {1, 8, 8});
  FeaturePyramid alone = extract(img, p);
  extract(other, p);  // unrelated extraction must not perturb anything
  FeaturePyramid again = extract(img, p);
  for (size_t l = 0; l < alone.levels.size(); ++l)
    CHECK(max_abs_diff(alone.levels[l], again.levels[l]) == 0.0);
}

TEST_CASE("pooling path commutes with axis flips") {
  Rng rng(50);
  Tensor img = random_tensor(rng, {1, 8, 8});
  std::vector<bool> fl{true, false};
  Tensor a = avg_pool2(flip_spatial(img, fl));
  Tensor b = flip_spatial(avg_pool2(img), fl);
  CHECK(max_abs_diff(a, b) < 1e-6);
}

TEST_CASE("gradient flow: every encoder parameter moves a random loss") {
  // With the feature-mixing head off zero, every encoder tensor should
  // receive a nonzero gradient on a generic loss of the features.
  EncoderConfig cfg;
  cfg.levels = 2;
  cfg.channels = {2, 3};
  cfg.nspatial = 2;
  EncoderParams p = init_encoder(51, cfg);
  for (auto& level : p.levels)
    for (auto& t : level) t.impl()->is_param = true;
  Rng rng(52);
  Tensor img = random_tensor(rng, {1, 8, 8});
  FeaturePyramid pyr = extract(img, p);
  Tensor loss = Tensor::scalar(0.0f);
  for (auto& f : pyr.levels) loss = add(loss, sum(mul(f, f)));
  backward(loss);
  for (auto& level : p.levels)
    for (auto& t : level) {
      double norm = 0.0;
      for (std::int64_t i = 0; i < t.size(); ++i)
        norm += std::abs(t.grad()[i]);
      CHECK(norm > 0.0);
    }
}
