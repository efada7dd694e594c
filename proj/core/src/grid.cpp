#include "gridreg/grid.hpp"

#include <cmath>

#include "binary_io.hpp"
#include "gridreg/ops.hpp"

namespace gridreg {

SamplingGrid identity_grid(const std::vector<int>& extents) {
  const int n = static_cast<int>(extents.size());
  require(n >= 1 && n <= 3, "identity_grid: 1-3 axes supported");
  std::int64_t vox = 1;
  for (int d : extents) {
    require(d >= 2, "identity_grid: extents must be >= 2");
    vox *= d;
  }
  auto st = strides_of(extents);
  std::vector<int> shape{n};
  shape.insert(shape.end(), extents.begin(), extents.end());
  std::vector<float> data(static_cast<size_t>(n) * vox);
  for (int a = 0; a < n; ++a) {
    const float inv = 2.0f / (extents[a] - 1);
    for (std::int64_t j = 0; j < vox; ++j) {
      const int xa = static_cast<int>((j / st[a]) % extents[a]);
      data[a * vox + j] = xa * inv - 1.0f;
    }
  }
  return {Tensor::from_data(std::move(shape), std::move(data))};
}

Tensor identity_grid_matrix(const std::vector<int>& extents) {
  return to_matrix(identity_grid(extents).values);
}

SamplingGrid compose(const SamplingGrid& outer, const SamplingGrid& inner) {
  require(outer.ndim() == inner.ndim(), "compose: dimensionality mismatch");
  return {grid_sample(outer.values, inner.values)};
}

Tensor to_displacement(const SamplingGrid& grid) {
  const int n = grid.ndim();
  auto sp = grid.spatial();
  const std::int64_t vox = spatial_size(grid.values.shape());
  const Tensor id = identity_grid(sp).values;
  std::vector<float> out(static_cast<size_t>(n) * vox);
  const float* pg = grid.values.data();
  const float* pi = id.data();
  for (int a = 0; a < n; ++a) {
    const float s = 0.5f * (sp[a] - 1);
    for (std::int64_t j = 0; j < vox; ++j)
      out[a * vox + j] = (pg[a * vox + j] - pi[a * vox + j]) * s;
  }
  return Tensor::from_data(grid.values.shape(), std::move(out));
}

SamplingGrid from_displacement(const Tensor& displacement) {
  const int n = displacement.extent(0);
  auto sp = spatial_shape(displacement.shape());
  require(static_cast<int>(sp.size()) == n,
          "from_displacement: channel count must match spatial rank");
  const std::int64_t vox = spatial_size(displacement.shape());
  const Tensor id = identity_grid(sp).values;
  std::vector<float> out(static_cast<size_t>(n) * vox);
  const float* pd = displacement.data();
  const float* pi = id.data();
  for (int a = 0; a < n; ++a) {
    const float s = 2.0f / (sp[a] - 1);
    for (std::int64_t j = 0; j < vox; ++j)
      out[a * vox + j] = pi[a * vox + j] + pd[a * vox + j] * s;
  }
  return {Tensor::from_data(displacement.shape(), std::move(out))};
}

namespace {

inline double det_n(const double m[3][3], int n) {
  if (n == 1) return m[0][0];
  if (n == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

}  // namespace

Tensor jacobian_determinants(const SamplingGrid& grid) {
  const int n = grid.ndim();
  auto sp = grid.spatial();
  for (int d : sp) require(d >= 3, "jacobian_determinants: extents must be >= 3");
  const std::int64_t vox = spatial_size(grid.values.shape());
  auto st = strides_of(sp);
  const float* pg = grid.values.data();

  std::vector<float> out(static_cast<size_t>(vox));
  std::vector<int> xi(n, 0);
  std::int64_t j = 0;
  do {
    double jac[3][3];
    for (int i = 0; i < n; ++i) {
      const float denorm = 0.5f * (sp[i] - 1);  // to voxel units
      for (int a = 0; a < n; ++a) {
        const float* ch = pg + static_cast<std::int64_t>(i) * vox;
        double d;
        if (xi[a] == 0)
          d = ch[j + st[a]] - ch[j];
        else if (xi[a] == sp[a] - 1)
          d = ch[j] - ch[j - st[a]];
        else
          d = 0.5 * (ch[j + st[a]] - ch[j - st[a]]);
        jac[i][a] = d * denorm;
      }
    }
    out[j] = static_cast<float>(det_n(jac, n));
    ++j;
  } while ([&] {
    for (int a = n - 1; a >= 0; --a) {
      if (++xi[a] < sp[a]) return true;
      xi[a] = 0;
    }
    return false;
  }());
  std::vector<int> shape = sp;
  return Tensor::from_data(std::move(shape), std::move(out));
}

NegJacobianStats neg_jacobian_stats(const SamplingGrid& grid) {
  Tensor det = jacobian_determinants(grid);
  NegJacobianStats s;
  const float* p = det.data();
  for (std::int64_t i = 0; i < det.size(); ++i)
    if (p[i] < 0.0f) ++s.count;
  s.fraction = static_cast<double>(s.count) / static_cast<double>(det.size());
  return s;
}

void write_grid(const SamplingGrid& grid, const std::string& path) {
  detail::ByteWriter w;
  w.raw("GRD1", 4);
  const int n = grid.ndim();
  w.u8(static_cast<std::uint8_t>(n));
  auto sp = grid.spatial();
  for (int d : sp) w.u32(static_cast<std::uint32_t>(d));
  w.f32_array(grid.values.data(), static_cast<size_t>(grid.values.size()));
  detail::write_file_atomic(path, w.bytes());
}

SamplingGrid read_grid(const std::string& path) {
  detail::ByteReader r(detail::read_file(path), path);
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::string(magic, 4) != "GRD1")
    throw detail::format_error(path + ": bad magic, expected GRD1");
  const int n = r.u8("rank");
  if (n < 1 || n > 3)
    throw detail::format_error(path + ": unsupported grid rank " +
                               std::to_string(n));
  std::vector<int> shape{n};
  std::int64_t vox = 1;
  for (int a = 0; a < n; ++a) {
    const auto d = r.u32("extent");
    shape.push_back(static_cast<int>(d));
    vox *= d;
  }
  std::vector<float> data(static_cast<size_t>(n) * vox);
  for (auto& v : data) v = r.f32("grid payload");
  return {Tensor::from_data(std::move(shape), std::move(data))};
}

}  // namespace gridreg
