#pragma once

#include <optional>
#include <string>

#include "gridreg/grid.hpp"
#include "gridreg/metrics.hpp"

namespace gridreg {

// ".vol" file: magic "VOL1", u8 rank, u8 dtype (1=float32, 2=int32),
// rank x u32 LE extents, then the row-major little-endian payload.
enum class VolumeDtype : std::uint8_t { kFloat32 = 1, kInt32 = 2 };

struct Volume {
  VolumeDtype dtype;
  Tensor image;        // valid when dtype == kFloat32; [1, spatial...]
  LabelVolume labels;  // valid when dtype == kInt32
};

Volume read_volume(const std::string& path);
void write_volume(const Tensor& image, const std::string& path);
void write_volume(const LabelVolume& labels, const std::string& path);

// Convenience readers that enforce the expected dtype.
Tensor read_image(const std::string& path);
LabelVolume read_labels(const std::string& path);

// Min-max normalized 8-bit grayscale PGM (P5) of one slice; a constant
// slice renders mid-gray. axis/index select the slicing plane for 3D
// volumes; for 2D volumes they are ignored.
void export_slice(const Tensor& volume, int axis, int index,
                  const std::string& path);

// Same, with grid lines every `spacing` voxels mapped through the grid.
void export_slice_with_grid(const Tensor& volume, const SamplingGrid& grid,
                            int axis, int index, int spacing,
                            const std::string& path);

}  // namespace gridreg
