#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "gridreg/metrics.hpp"
#include "gridreg/synthdata.hpp"
#include "test_util.hpp"

using namespace gridreg;

namespace {

LabelVolume random_labels(std::uint64_t seed, const std::vector<int>& extents,
                          int n_labels) {
  Rng rng(seed);
  LabelVolume v;
  v.extents = extents;
  v.labels.resize(static_cast<size_t>(v.size()));
  for (auto& l : v.labels)
    l = static_cast<std::int32_t>(rng.next_u64() % (n_labels + 1));
  return v;
}

// All-pairs directed-distance HD95 oracle, pooled symmetric, linear
// interpolation between order statistics.
double hd95_oracle(const LabelVolume& a, const LabelVolume& b,
                   std::int32_t label) {
  auto ba = boundary_voxels(a, label);
  auto bb = boundary_voxels(b, label);
  REQUIRE(!ba.empty());
  REQUIRE(!bb.empty());
  auto nearest = [](const std::vector<int>& p,
                    const std::vector<std::vector<int>>& set) {
    double best = 1e30;
    for (const auto& q : set) {
      double d2 = 0.0;
      for (size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - q[i];
        d2 += d * d;
      }
      best = std::min(best, d2);
    }
    return std::sqrt(best);
  };
  std::vector<double> pooled;
  for (const auto& p : ba) pooled.push_back(nearest(p, bb));
  for (const auto& p : bb) pooled.push_back(nearest(p, ba));
  std::sort(pooled.begin(), pooled.end());
  const double rank = 0.95 * (pooled.size() - 1);
  const size_t lo = static_cast<size_t>(rank);
  if (lo + 1 >= pooled.size()) return pooled.back();
  const double frac = rank - lo;
  return pooled[lo] * (1.0 - frac) + pooled[lo + 1] * frac;
}

}  // namespace

TEST_CASE("warp_labels: identity grid is the identity map") {
  LabelVolume v = random_labels(100, {5, 6}, 3);
  LabelVolume w = warp_labels(v, identity_grid({5, 6}));
  CHECK(w.labels == v.labels);
}

TEST_CASE("warp_labels: integer one-voxel shift with border clamp") {
  LabelVolume v;
  v.extents = {4};
  v.labels = {1, 2, 3, 4};
  SamplingGrid g = identity_grid({4});
  for (int i = 0; i < 4; ++i) g.values.data()[i] += 2.0f / 3.0f;  // +1 voxel
  LabelVolume w = warp_labels(v, g);
  CHECK(w.labels == std::vector<std::int32_t>{2, 3, 4, 4});
}

TEST_CASE("warp_labels: outputs stay in the input vocabulary") {
  LabelVolume v = random_labels(101, {8, 8}, 4);
  SamplingGrid g = make_smooth_deformation(102, {8, 8}, 1.8, 1.0);
  LabelVolume w = warp_labels(v, g);
  auto vocab = v.vocabulary();
  for (auto l : w.labels) {
    if (l == 0) continue;
    CHECK(std::find(vocab.begin(), vocab.end(), l) != vocab.end());
  }
}

TEST_CASE("dice: closed forms") {
  LabelVolume a = random_labels(103, {4, 4}, 2);
  CHECK(dice(a, a, 1) == 1.0);

  LabelVolume x, y;
  x.extents = y.extents = {3, 3};
  x.labels.assign(9, 0);
  y.labels.assign(9, 0);
  // Disjoint supports.
  x.labels[0] = 1;
  y.labels[8] = 1;
  CHECK(dice(x, y, 1) == 0.0);

  // |A|=4, |B|=4, |A and B|=2 -> 0.5 on a constructed 3x3 case.
  x.labels = {2, 2, 2, 2, 0, 0, 0, 0, 0};
  y.labels = {2, 2, 0, 0, 2, 2, 0, 0, 0};
  CHECK(dice(x, y, 2) == 0.5);

  // Both empty counts as success.
  CHECK(dice(x, y, 9) == 1.0);
}

TEST_CASE("dice: symmetric and flip-invariant") {
  LabelVolume a = random_labels(104, {6, 6}, 3);
  LabelVolume b = random_labels(105, {6, 6}, 3);
  CHECK(dice(a, b, 2) == dice(b, a, 2));

  auto flip0 = [](const LabelVolume& v) {
    LabelVolume out = v;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        out.labels[i * 6 + j] = v.labels[(5 - i) * 6 + j];
    return out;
  };
  CHECK(dice(flip0(a), flip0(b), 2) == dice(a, b, 2));
}

TEST_CASE("mean_dice: mean semantics and recomputation") {
  LabelVolume a = random_labels(106, {6, 6}, 3);
  MeanDice ident = mean_dice(a, a, a.vocabulary());
  CHECK(ident.mean == 1.0);

  // Two labels, one perfect and one disjoint -> mean 0.5.
  LabelVolume x, y;
  x.extents = y.extents = {4};
  x.labels = {1, 1, 2, 0};
  y.labels = {1, 1, 0, 2};
  MeanDice half = mean_dice(x, y, {1, 2});
  CHECK(half.mean == 0.5);

  LabelVolume b = random_labels(107, {6, 6}, 3);
  auto vocab = a.vocabulary();
  MeanDice md = mean_dice(a, b, vocab);
  double acc = 0.0;
  for (auto l : vocab) acc += dice(a, b, l);
  CHECK(md.mean == doctest::Approx(acc / vocab.size()));
  REQUIRE(md.per_label.size() == vocab.size());
}

TEST_CASE("sd_log_jacobian: identity and constant-offset invariance") {
  // Stencil determinants round to 1 +- a few ulps, so log is ~1e-7, not 0.
  CHECK(sd_log_jacobian(identity_grid({6, 6, 6})) < 1e-6);
  SamplingGrid g = make_smooth_deformation(108, {8, 8}, 1.5, 1.0);
  const double base = sd_log_jacobian(g);
  SamplingGrid shifted{g.values.clone_data()};
  for (std::int64_t i = 0; i < spatial_size(g.values.shape()); ++i)
    shifted.values.data()[i] += 0.07f;
  CHECK(sd_log_jacobian(shifted) == doctest::Approx(base).epsilon(1e-6));
}

TEST_CASE("sd_log_jacobian: matches a two-pass oracle on a random 16^3 grid") {
  SamplingGrid g = make_smooth_deformation(109, {16, 16, 16}, 2.5, 1.0);
  Tensor det = jacobian_determinants(g);
  const int d = 16;
  std::vector<double> logs;
  for (int z = 1; z < d - 1; ++z)
    for (int y = 1; y < d - 1; ++y)
      for (int x = 1; x < d - 1; ++x)
        logs.push_back(std::log(std::max(
            static_cast<double>(det.data()[(z * d + y) * d + x]), 1e-9)));
  double mean = 0.0;
  for (double v : logs) mean += v;
  mean /= logs.size();
  double var = 0.0;
  for (double v : logs) var += (v - mean) * (v - mean);
  var /= logs.size();
  CHECK(sd_log_jacobian(g) == doctest::Approx(std::sqrt(var)).epsilon(1e-6));
}

TEST_CASE("hd95: closed forms") {
  LabelVolume a = random_labels(110, {6, 6}, 2);
  CHECK(hd95(a, a, 1) == 0.0);

  LabelVolume x, y;
  x.extents = y.extents = {8};
  x.labels.assign(8, 0);
  y.labels.assign(8, 0);
  x.labels[1] = 1;
  y.labels[4] = 1;
  CHECK(hd95(x, y, 1) == doctest::Approx(3.0));

  CHECK_THROWS_AS(hd95(x, y, 5), contract_error);
}

TEST_CASE("hd95: matches the all-pairs brute-force oracle on random 16^3") {
  SyntheticScene a = make_blob_scene(111, {16, 16, 16}, 4);
  SyntheticScene b = make_blob_scene(112, {16, 16, 16}, 4);
  for (std::int32_t label : a.labels.vocabulary()) {
    if (boundary_voxels(b.labels, label).empty()) continue;
    CHECK(hd95(a.labels, b.labels, label) ==
          doctest::Approx(hd95_oracle(a.labels, b.labels, label))
              .epsilon(1e-12));
    // Pooled distances make the metric symmetric by construction.
    CHECK(hd95(a.labels, b.labels, label) ==
          doctest::Approx(hd95(b.labels, a.labels, label)));
  }
}

TEST_CASE("metric oracles on randomized 16^3 label volumes") {
  LabelVolume a = random_labels(113, {16, 16, 16}, 3);
  LabelVolume b = random_labels(114, {16, 16, 16}, 3);
  for (std::int32_t label = 1; label <= 3; ++label) {
    std::int64_t inter = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.labels.size(); ++i) {
      const bool ia = a.labels[i] == label, ib = b.labels[i] == label;
      inter += ia && ib;
      na += ia;
      nb += ib;
    }
    CHECK(dice(a, b, label) ==
          doctest::Approx(2.0 * inter / static_cast<double>(na + nb)));
  }
}

TEST_CASE("format_report: flags empty labels and emits a summary row") {
  LabelVolume x, y;
  x.extents = y.extents = {4};
  x.labels = {1, 1, 0, 0};
  y.labels = {1, 0, 0, 0};
  PairReport r;
  r.pair_id = "p";
  r.dice = mean_dice(x, y, {1, 3});
  r.sd_log_j = 0.0;
  std::string report = format_report({r});
  CHECK(report.find("summary") != std::string::npos);
  CHECK(report.find("empty") != std::string::npos);  // label 3 flagged
}
