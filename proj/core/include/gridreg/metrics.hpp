#pragma once

#include <string>

#include "gridreg/grid.hpp"

namespace gridreg {

// Integer segmentation aligned with an image volume; 0 is background.
struct LabelVolume {
  std::vector<int> extents;
  std::vector<std::int32_t> labels;  // row-major

  std::int64_t size() const {
    std::int64_t n = 1;
    for (int d : extents) n *= d;
    return n;
  }
  // Sorted nonzero labels present in the volume.
  std::vector<std::int32_t> vocabulary() const;
};

// Nearest-neighbor resampling; labels are categorical.
LabelVolume warp_labels(const LabelVolume& labels, const SamplingGrid& grid);

// 2|A∩B| / (|A|+|B|); 1.0 when both supports are empty.
double dice(const LabelVolume& a, const LabelVolume& b, std::int32_t label);

struct DiceRow {
  std::int32_t label = 0;
  double value = 0.0;
  bool both_empty = false;
};
struct MeanDice {
  double mean = 0.0;
  std::vector<DiceRow> per_label;
};
// Unweighted mean over the nonzero vocabulary.
MeanDice mean_dice(const LabelVolume& a, const LabelVolume& b,
                   const std::vector<std::int32_t>& vocabulary);

// Standard deviation of log(max(det J, 1e-9)) over interior voxels
// (boundary stencil voxels excluded).
double sd_log_jacobian(const SamplingGrid& grid);

// 95th percentile (linear interpolation between order statistics) of the
// pooled directed Euclidean distances between boundary voxel sets.
// Throws contract_error when either support is empty.
double hd95(const LabelVolume& a, const LabelVolume& b, std::int32_t label);

// Boundary voxels of one label: support voxels with a face-connected
// in-volume neighbor of a different label; falls back to the whole
// support when erosion leaves no boundary.
std::vector<std::vector<int>> boundary_voxels(const LabelVolume& v,
                                              std::int32_t label);

struct PairReport {
  std::string pair_id;
  MeanDice dice;
  NegJacobianStats neg_jacobian;
  double sd_log_j = 0.0;
  std::vector<std::pair<std::int32_t, double>> hd95_per_label;
};

// Tab-separated evaluation table plus a mean +- std summary row.
std::string format_report(const std::vector<PairReport>& rows);

}  // namespace gridreg
