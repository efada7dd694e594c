#include "gridreg/volume_io.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "gridreg/ops.hpp"

namespace gridreg {

namespace {

void write_header(detail::ByteWriter& w, VolumeDtype dtype,
                  const std::vector<int>& extents) {
  w.raw("VOL1", 4);
  w.u8(static_cast<std::uint8_t>(extents.size()));
  w.u8(static_cast<std::uint8_t>(dtype));
  for (int d : extents) w.u32(static_cast<std::uint32_t>(d));
}

}  // namespace

void write_volume(const Tensor& image, const std::string& path) {
  require(image.rank() >= 2 && image.extent(0) == 1,
          "write_volume: image must be [1, spatial...]");
  detail::ByteWriter w;
  write_header(w, VolumeDtype::kFloat32, spatial_shape(image.shape()));
  w.f32_array(image.data(), static_cast<size_t>(image.size()));
  detail::write_file_atomic(path, w.bytes());
}

void write_volume(const LabelVolume& labels, const std::string& path) {
  detail::ByteWriter w;
  write_header(w, VolumeDtype::kInt32, labels.extents);
  w.i32_array(labels.labels.data(), labels.labels.size());
  detail::write_file_atomic(path, w.bytes());
}

Volume read_volume(const std::string& path) {
  detail::ByteReader r(detail::read_file(path), path);
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::string(magic, 4) != "VOL1")
    throw detail::format_error(path + ": bad magic, expected VOL1");
  const int rank = r.u8("rank");
  if (rank < 1 || rank > 3)
    throw detail::format_error(path + ": unsupported rank " +
                               std::to_string(rank));
  const int dtype = r.u8("dtype");
  if (dtype != 1 && dtype != 2)
    throw detail::format_error(path + ": unknown dtype code " +
                               std::to_string(dtype));
  std::vector<int> extents;
  std::int64_t vox = 1;
  for (int a = 0; a < rank; ++a) {
    extents.push_back(static_cast<int>(r.u32("extent")));
    vox *= extents.back();
  }
  Volume v;
  v.dtype = static_cast<VolumeDtype>(dtype);
  if (v.dtype == VolumeDtype::kFloat32) {
    std::vector<float> data(static_cast<size_t>(vox));
    for (auto& x : data) x = r.f32("float payload");
    std::vector<int> shape{1};
    shape.insert(shape.end(), extents.begin(), extents.end());
    v.image = Tensor::from_data(std::move(shape), std::move(data));
  } else {
    v.labels.extents = extents;
    v.labels.labels.resize(static_cast<size_t>(vox));
    for (auto& x : v.labels.labels)
      x = static_cast<std::int32_t>(r.u32("int payload"));
  }
  return v;
}

Tensor read_image(const std::string& path) {
  Volume v = read_volume(path);
  if (v.dtype != VolumeDtype::kFloat32)
    throw detail::format_error(path + ": expected a float32 volume");
  return v.image;
}

LabelVolume read_labels(const std::string& path) {
  Volume v = read_volume(path);
  if (v.dtype != VolumeDtype::kInt32)
    throw detail::format_error(path + ": expected an int32 label volume");
  return v.labels;
}

namespace {

struct Slice {
  int h = 0, w = 0;
  int axes[2] = {0, 1};           // volume axes spanning the slice
  std::vector<std::int64_t> src;  // flat volume index per pixel
};

Slice make_slice(const std::vector<int>& sp, int axis, int index) {
  const int n = static_cast<int>(sp.size());
  Slice s;
  auto st = strides_of(sp);
  if (n == 2) {
    s.axes[0] = 0;
    s.axes[1] = 1;
    s.h = sp[0];
    s.w = sp[1];
    s.src.resize(static_cast<size_t>(s.h) * s.w);
    for (int i = 0; i < s.h; ++i)
      for (int j = 0; j < s.w; ++j)
        s.src[static_cast<size_t>(i) * s.w + j] = i * st[0] + j * st[1];
    return s;
  }
  require(n == 3, "export_slice: 2D or 3D volumes only");
  require(axis >= 0 && axis < 3, "export_slice: axis out of range");
  require(index >= 0 && index < sp[axis], "export_slice: index out of range");
  int ax0 = -1, ax1 = -1;
  for (int a = 0; a < 3; ++a) {
    if (a == axis) continue;
    (ax0 < 0 ? ax0 : ax1) = a;
  }
  s.axes[0] = ax0;
  s.axes[1] = ax1;
  s.h = sp[ax0];
  s.w = sp[ax1];
  s.src.resize(static_cast<size_t>(s.h) * s.w);
  for (int i = 0; i < s.h; ++i)
    for (int j = 0; j < s.w; ++j)
      s.src[static_cast<size_t>(i) * s.w + j] =
          index * st[axis] + i * st[ax0] + j * st[ax1];
  return s;
}

std::vector<unsigned char> rasterize(const Tensor& volume, const Slice& s) {
  const float* p = volume.data();
  float lo = p[s.src[0]], hi = p[s.src[0]];
  for (auto idx : s.src) {
    lo = std::min(lo, p[idx]);
    hi = std::max(hi, p[idx]);
  }
  std::vector<unsigned char> px(s.src.size());
  if (hi <= lo) {
    std::fill(px.begin(), px.end(), static_cast<unsigned char>(128));
  } else {
    for (size_t i = 0; i < s.src.size(); ++i)
      px[i] = static_cast<unsigned char>(
          std::lround(255.0f * (p[s.src[i]] - lo) / (hi - lo)));
  }
  return px;
}

void write_pgm(const std::vector<unsigned char>& px, int h, int w,
               const std::string& path) {
  detail::ByteWriter out;
  const std::string header =
      "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.raw(header.data(), header.size());
  out.raw(px.data(), px.size());
  detail::write_file_atomic(path, out.bytes());
}

}  // namespace

void export_slice(const Tensor& volume, int axis, int index,
                  const std::string& path) {
  require(volume.rank() >= 3 && volume.extent(0) == 1,
          "export_slice: volume must be [1, spatial...]");
  const auto sp = spatial_shape(volume.shape());
  Slice s = make_slice(sp, axis, index);
  write_pgm(rasterize(volume, s), s.h, s.w, path);
}

void export_slice_with_grid(const Tensor& volume, const SamplingGrid& grid,
                            int axis, int index, int spacing,
                            const std::string& path) {
  require(spacing >= 1, "export_slice_with_grid: spacing must be >= 1");
  const auto sp = spatial_shape(volume.shape());
  require(grid.spatial() == sp,
          "export_slice_with_grid: grid/volume shape mismatch");
  Slice s = make_slice(sp, axis, index);
  auto px = rasterize(volume, s);

  // Lattice lines of the source plane, drawn where the grid maps them.
  const std::int64_t vox = spatial_size(grid.values.shape());
  const float* pg = grid.values.data();
  const int a0 = s.axes[0], a1 = s.axes[1];
  for (int i = 0; i < s.h; ++i)
    for (int j = 0; j < s.w; ++j) {
      if (i % spacing != 0 && j % spacing != 0) continue;
      const std::int64_t src = s.src[static_cast<size_t>(i) * s.w + j];
      const float y =
          (pg[a0 * vox + src] + 1.0f) * 0.5f * (sp[a0] - 1);
      const float x =
          (pg[a1 * vox + src] + 1.0f) * 0.5f * (sp[a1] - 1);
      const int iy = static_cast<int>(std::lround(y));
      const int ix = static_cast<int>(std::lround(x));
      if (iy >= 0 && iy < s.h && ix >= 0 && ix < s.w)
        px[static_cast<size_t>(iy) * s.w + ix] = 255;
    }
  write_pgm(px, s.h, s.w, path);
}

}  // namespace gridreg
