#include "gridreg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace gridreg {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch");
}

bool advance(std::vector<int>& idx, const std::vector<int>& extents) {
  for (int a = static_cast<int>(extents.size()) - 1; a >= 0; --a) {
    if (++idx[a] < extents[a]) return true;
    idx[a] = 0;
  }
  return false;
}

}  // namespace

std::vector<std::int64_t> strides_of(const std::vector<int>& shape) {
  std::vector<std::int64_t> s(shape.size(), 1);
  for (int a = static_cast<int>(shape.size()) - 2; a >= 0; --a)
    s[a] = s[a + 1] * shape[a + 1];
  return s;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<float> out(a.size());
  const float* pa = a.data();
  const float* pb = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
  auto ia = a.impl();
  auto ib = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [ia, ib](TensorImpl& o) {
    if (ia->tracked()) {
      ia->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) ia->grad[i] += o.grad[i];
    }
    if (ib->tracked()) {
      ib->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) ib->grad[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<float> out(a.size());
  const float* pa = a.data();
  const float* pb = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
  auto ia = a.impl();
  auto ib = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [ia, ib](TensorImpl& o) {
    if (ia->tracked()) {
      ia->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) ia->grad[i] += o.grad[i];
    }
    if (ib->tracked()) {
      ib->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) ib->grad[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<float> out(a.size());
  const float* pa = a.data();
  const float* pb = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
  auto ia = a.impl();
  auto ib = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [ia, ib](TensorImpl& o) {
    if (ia->tracked()) {
      ia->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i)
        ia->grad[i] += o.grad[i] * ib->data[i];
    }
    if (ib->tracked()) {
      ib->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i)
        ib->grad[i] += o.grad[i] * ia->data[i];
    }
  });
}

Tensor scale(const Tensor& x, float s) {
  std::vector<float> out(x.size());
  const float* px = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = px[i] * s;
  auto ix = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [ix, s](TensorImpl& o) {
    if (!ix->tracked()) return;
    ix->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i) ix->grad[i] += o.grad[i] * s;
  });
}

Tensor scale_by(const Tensor& x, const Tensor& alpha) {
  require(alpha.size() == 1, "scale_by: alpha must be a scalar tensor");
  const float s = alpha.data()[0];
  std::vector<float> out(x.size());
  const float* px = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = px[i] * s;
  auto ix = x.impl();
  auto ia = alpha.impl();
  return make_result(x.shape(), std::move(out), {x, alpha},
                     [ix, ia, s](TensorImpl& o) {
                       if (ix->tracked()) {
                         ix->ensure_grad();
                         for (size_t i = 0; i < o.grad.size(); ++i)
                           ix->grad[i] += o.grad[i] * s;
                       }
                       if (ia->tracked()) {
                         ia->ensure_grad();
                         float acc = 0.0f;
                         for (size_t i = 0; i < o.grad.size(); ++i)
                           acc += o.grad[i] * ix->data[i];
                         ia->grad[0] += acc;
                       }
                     });
}

Tensor leaky_relu(const Tensor& x, float slope) {
  std::vector<float> out(x.size());
  const float* px = x.data();
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = px[i] > 0.0f ? px[i] : slope * px[i];
  auto ix = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [ix, slope](TensorImpl& o) {
    if (!ix->tracked()) return;
    ix->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i)
      ix->grad[i] += o.grad[i] * (ix->data[i] > 0.0f ? 1.0f : slope);
  });
}

Tensor sum(const Tensor& x) {
  float acc = 0.0f;
  const float* px = x.data();
  for (std::int64_t i = 0; i < x.size(); ++i) acc += px[i];
  auto ix = x.impl();
  return make_result({1}, {acc}, {x}, [ix](TensorImpl& o) {
    if (!ix->tracked()) return;
    ix->ensure_grad();
    for (size_t i = 0; i < ix->grad.size(); ++i) ix->grad[i] += o.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0f / x.size()); }

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require(a.rank() == b.rank() && a.rank() >= 2,
          "concat_channels: rank mismatch");
  require(spatial_shape(a.shape()) == spatial_shape(b.shape()),
          "concat_channels: spatial shape mismatch");
  const std::int64_t vox = spatial_size(a.shape());
  const int ca = a.extent(0), cb = b.extent(0);
  std::vector<int> shape = a.shape();
  shape[0] = ca + cb;
  std::vector<float> out(static_cast<size_t>((ca + cb) * vox));
  std::memcpy(out.data(), a.data(), sizeof(float) * ca * vox);
  std::memcpy(out.data() + ca * vox, b.data(), sizeof(float) * cb * vox);
  auto ia = a.impl();
  auto ib = b.impl();
  return make_result(std::move(shape), std::move(out), {a, b},
                     [ia, ib, ca, cb, vox](TensorImpl& o) {
                       if (ia->tracked()) {
                         ia->ensure_grad();
                         for (std::int64_t i = 0; i < ca * vox; ++i)
                           ia->grad[i] += o.grad[i];
                       }
                       if (ib->tracked()) {
                         ib->ensure_grad();
                         for (std::int64_t i = 0; i < cb * vox; ++i)
                           ib->grad[i] += o.grad[ca * vox + i];
                       }
                     });
}

Tensor to_matrix(const Tensor& x) {
  require(x.rank() >= 2, "to_matrix: need channel + spatial axes");
  const int c = x.extent(0);
  const std::int64_t p = spatial_size(x.shape());
  std::vector<float> out(static_cast<size_t>(p * c));
  const float* px = x.data();
  for (std::int64_t j = 0; j < p; ++j)
    for (int ch = 0; ch < c; ++ch) out[j * c + ch] = px[ch * p + j];
  auto ix = x.impl();
  return make_result({static_cast<int>(p), c}, std::move(out), {x},
                     [ix, c, p](TensorImpl& o) {
                       if (!ix->tracked()) return;
                       ix->ensure_grad();
                       for (std::int64_t j = 0; j < p; ++j)
                         for (int ch = 0; ch < c; ++ch)
                           ix->grad[ch * p + j] += o.grad[j * c + ch];
                     });
}

Tensor from_matrix(const Tensor& x, const std::vector<int>& spatial) {
  require(x.rank() == 2, "from_matrix: input must be rank 2");
  std::int64_t p = 1;
  for (int d : spatial) p *= d;
  require(p == x.extent(0), "from_matrix: spatial size mismatch");
  const int n = x.extent(1);
  std::vector<int> shape{n};
  shape.insert(shape.end(), spatial.begin(), spatial.end());
  std::vector<float> out(static_cast<size_t>(p * n));
  const float* px = x.data();
  for (std::int64_t j = 0; j < p; ++j)
    for (int ch = 0; ch < n; ++ch) out[ch * p + j] = px[j * n + ch];
  auto ix = x.impl();
  return make_result(std::move(shape), std::move(out), {x},
                     [ix, n, p](TensorImpl& o) {
                       if (!ix->tracked()) return;
                       ix->ensure_grad();
                       for (std::int64_t j = 0; j < p; ++j)
                         for (int ch = 0; ch < n; ++ch)
                           ix->grad[j * n + ch] += o.grad[ch * p + j];
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul: rank-2 tensors required");
  require(a.extent(1) == b.extent(0), "matmul: inner extents differ");
  const int P = a.extent(0), C = a.extent(1), Q = b.extent(1);
  std::vector<float> out(static_cast<size_t>(P) * Q, 0.0f);
  const float* pa = a.data();
  const float* pb = b.data();
  for (int i = 0; i < P; ++i)
    for (int k = 0; k < C; ++k) {
      const float av = pa[i * C + k];
      if (av == 0.0f) continue;
      for (int j = 0; j < Q; ++j) out[i * Q + j] += av * pb[k * Q + j];
    }
  auto ia = a.impl();
  auto ib = b.impl();
  return make_result({P, Q}, std::move(out), {a, b},
                     [ia, ib, P, C, Q](TensorImpl& o) {
                       if (ia->tracked()) {
                         ia->ensure_grad();
                         for (int i = 0; i < P; ++i)
                           for (int j = 0; j < Q; ++j) {
                             const float g = o.grad[i * Q + j];
                             for (int k = 0; k < C; ++k)
                               ia->grad[i * C + k] += g * ib->data[k * Q + j];
                           }
                       }
                       if (ib->tracked()) {
                         ib->ensure_grad();
                         for (int i = 0; i < P; ++i)
                           for (int k = 0; k < C; ++k) {
                             const float av = ia->data[i * C + k];
                             for (int j = 0; j < Q; ++j)
                               ib->grad[k * Q + j] += av * o.grad[i * Q + j];
                           }
                       }
                     });
}

Tensor transpose2d(const Tensor& x) {
  require(x.rank() == 2, "transpose2d: rank-2 tensor required");
  const int r = x.extent(0), c = x.extent(1);
  std::vector<float> out(static_cast<size_t>(r) * c);
  const float* px = x.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[j * r + i] = px[i * c + j];
  auto ix = x.impl();
  return make_result({c, r}, std::move(out), {x}, [ix, r, c](TensorImpl& o) {
    if (!ix->tracked()) return;
    ix->ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) ix->grad[i * c + j] += o.grad[j * r + i];
  });
}

Tensor softmax_rows(const Tensor& x) {
  require(x.rank() == 2, "softmax_rows: rank-2 tensor required");
  const int P = x.extent(0), K = x.extent(1);
  std::vector<float> out(static_cast<size_t>(P) * K);
  const float* px = x.data();
  for (int i = 0; i < P; ++i) {
    float mx = px[i * K];
    for (int j = 1; j < K; ++j) mx = std::max(mx, px[i * K + j]);
    float denom = 0.0f;
    for (int j = 0; j < K; ++j) {
      out[i * K + j] = std::exp(px[i * K + j] - mx);
      denom += out[i * K + j];
    }
    for (int j = 0; j < K; ++j) out[i * K + j] /= denom;
  }
  auto ix = x.impl();
  return make_result({P, K}, std::move(out), {x}, [ix, P, K](TensorImpl& o) {
    if (!ix->tracked()) return;
    ix->ensure_grad();
    for (int i = 0; i < P; ++i) {
      float dot = 0.0f;
      for (int j = 0; j < K; ++j) dot += o.grad[i * K + j] * o.data[i * K + j];
      for (int j = 0; j < K; ++j)
        ix->grad[i * K + j] += o.data[i * K + j] * (o.grad[i * K + j] - dot);
    }
  });
}

Tensor conv(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  const int nsp = input.rank() - 1;
  require(nsp >= 1 && nsp <= 3, "conv: 1-3 spatial axes supported");
  require(kernel.rank() == nsp + 2, "conv: kernel rank must be spatial+2");
  require(kernel.extent(1) == input.extent(0),
          "conv: kernel input-channel extent mismatch");
  const int cout = kernel.extent(0), cin = input.extent(0);
  require(bias.rank() == 1 && bias.extent(0) == cout,
          "conv: bias extent mismatch");
  std::vector<int> sp = spatial_shape(input.shape());
  std::vector<int> ksp(kernel.shape().begin() + 2, kernel.shape().end());
  std::vector<int> pad(nsp);
  for (int a = 0; a < nsp; ++a) {
    require(ksp[a] % 2 == 1, "conv: kernel extents must be odd");
    pad[a] = (ksp[a] - 1) / 2;
  }
  const std::int64_t vox = spatial_size(input.shape());
  const std::int64_t kvox = [&] {
    std::int64_t n = 1;
    for (int d : ksp) n *= d;
    return n;
  }();
  auto spst = strides_of(sp);
  auto kst = strides_of(ksp);

  // Per-tap spatial offsets relative to the output voxel.
  std::vector<std::vector<int>> taps(static_cast<size_t>(kvox),
                                     std::vector<int>(nsp));
  {
    std::vector<int> ki(nsp, 0);
    std::int64_t t = 0;
    do {
      for (int a = 0; a < nsp; ++a) taps[t][a] = ki[a] - pad[a];
      ++t;
    } while (advance(ki, ksp));
  }

  std::vector<int> shape{cout};
  shape.insert(shape.end(), sp.begin(), sp.end());
  std::vector<float> out(static_cast<size_t>(cout) * vox);
  const float* pin = input.data();
  const float* pk = kernel.data();
  const float* pb = bias.data();

  std::vector<int> xi(nsp, 0);
  std::int64_t j = 0;
  do {
    for (std::int64_t t = 0; t < kvox; ++t) {
      std::int64_t src = 0;
      bool ok = true;
      for (int a = 0; a < nsp; ++a) {
        const int s = xi[a] + taps[t][a];
        if (s < 0 || s >= sp[a]) {
          ok = false;
          break;
        }
        src += s * spst[a];
      }
      if (!ok) continue;
      for (int oc = 0; oc < cout; ++oc) {
        float acc = 0.0f;
        for (int ic = 0; ic < cin; ++ic)
          acc += pin[ic * vox + src] * pk[(oc * cin + ic) * kvox + t];
        out[oc * vox + j] += acc;
      }
    }
    ++j;
  } while (advance(xi, sp));
  for (int oc = 0; oc < cout; ++oc)
    for (std::int64_t v = 0; v < vox; ++v) out[oc * vox + v] += pb[oc];

  auto iin = input.impl();
  auto ik = kernel.impl();
  auto ib = bias.impl();
  return make_result(
      std::move(shape), std::move(out), {input, kernel, bias},
      [iin, ik, ib, sp, spst, taps, nsp, cin, cout, vox, kvox](TensorImpl& o) {
        const bool want_in = iin->tracked();
        const bool want_k = ik->tracked();
        const bool want_b = ib->tracked();
        if (want_in) iin->ensure_grad();
        if (want_k) ik->ensure_grad();
        if (want_b) ib->ensure_grad();
        if (want_b) {
          for (int oc = 0; oc < cout; ++oc) {
            float acc = 0.0f;
            for (std::int64_t v = 0; v < vox; ++v) acc += o.grad[oc * vox + v];
            ib->grad[oc] += acc;
          }
        }
        if (!want_in && !want_k) return;
        std::vector<int> xi(nsp, 0);
        std::int64_t j = 0;
        do {
          for (std::int64_t t = 0; t < static_cast<std::int64_t>(taps.size());
               ++t) {
            std::int64_t src = 0;
            bool ok = true;
            for (int a = 0; a < nsp; ++a) {
              const int s = xi[a] + taps[t][a];
              if (s < 0 || s >= sp[a]) {
                ok = false;
                break;
              }
              src += s * spst[a];
            }
            if (!ok) continue;
            for (int oc = 0; oc < cout; ++oc) {
              const float g = o.grad[oc * vox + j];
              if (g == 0.0f) continue;
              for (int ic = 0; ic < cin; ++ic) {
                const std::int64_t kidx = (oc * cin + ic) * kvox + t;
                if (want_in) iin->grad[ic * vox + src] += g * ik->data[kidx];
                if (want_k) ik->grad[kidx] += g * iin->data[ic * vox + src];
              }
            }
          }
          ++j;
        } while (advance(xi, sp));
      });
}

Tensor avg_pool2(const Tensor& input) {
  const int nsp = input.rank() - 1;
  require(nsp >= 1 && nsp <= 3, "avg_pool2: 1-3 spatial axes supported");
  std::vector<int> sp = spatial_shape(input.shape());
  std::vector<int> osp(nsp);
  for (int a = 0; a < nsp; ++a) {
    require(sp[a] % 2 == 0, "avg_pool2: spatial extents must be even");
    osp[a] = sp[a] / 2;
  }
  const int c = input.extent(0);
  const std::int64_t ivox = spatial_size(input.shape());
  std::int64_t ovox = 1;
  for (int d : osp) ovox *= d;
  auto ist = strides_of(sp);
  auto ost = strides_of(osp);
  const int blocks = 1 << nsp;
  const float w = 1.0f / blocks;

  std::vector<int> shape{c};
  shape.insert(shape.end(), osp.begin(), osp.end());
  std::vector<float> out(static_cast<size_t>(c) * ovox, 0.0f);
  const float* pin = input.data();
  std::vector<int> xi(nsp, 0);
  std::int64_t j = 0;
  do {
    for (int m = 0; m < blocks; ++m) {
      std::int64_t src = 0;
      for (int a = 0; a < nsp; ++a)
        src += (2 * xi[a] + ((m >> a) & 1)) * ist[a];
      for (int ch = 0; ch < c; ++ch)
        out[ch * ovox + j] += w * pin[ch * ivox + src];
    }
    ++j;
  } while (advance(xi, osp));

  auto iin = input.impl();
  return make_result(std::move(shape), std::move(out), {input},
                     [iin, osp, ist, nsp, c, ivox, ovox, blocks,
                      w](TensorImpl& o) {
                       if (!iin->tracked()) return;
                       iin->ensure_grad();
                       std::vector<int> xi(nsp, 0);
                       std::int64_t j = 0;
                       do {
                         for (int m = 0; m < blocks; ++m) {
                           std::int64_t src = 0;
                           for (int a = 0; a < nsp; ++a)
                             src += (2 * xi[a] + ((m >> a) & 1)) * ist[a];
                           for (int ch = 0; ch < c; ++ch)
                             iin->grad[ch * ivox + src] +=
                                 w * o.grad[ch * ovox + j];
                         }
                         ++j;
                       } while (advance(xi, osp));
                     });
}

Tensor grid_sample(const Tensor& input, const Tensor& grid) {
  const int nsp = input.rank() - 1;
  require(nsp >= 1 && nsp <= 3, "grid_sample: 1-3 spatial axes supported");
  require(grid.rank() == nsp + 1, "grid_sample: grid rank mismatch");
  require(grid.extent(0) == nsp,
          "grid_sample: grid channel count must equal input spatial rank");
  const int c = input.extent(0);
  std::vector<int> isp = spatial_shape(input.shape());
  std::vector<int> osp = spatial_shape(grid.shape());
  const std::int64_t ivox = spatial_size(input.shape());
  const std::int64_t ovox = spatial_size(grid.shape());
  auto ist = strides_of(isp);
  const int corners = 1 << nsp;

  std::vector<int> shape{c};
  shape.insert(shape.end(), osp.begin(), osp.end());
  std::vector<float> out(static_cast<size_t>(c) * ovox, 0.0f);
  const float* pin = input.data();
  const float* pg = grid.data();

  // Forward + enough saved geometry for the backward closure to recompute
  // weights cheaply (it re-reads grid and input data from the parents).
  auto sample_geometry = [&](std::int64_t j, int* i0, float* t, bool* live) {
    for (int a = 0; a < nsp; ++a) {
      const int d = isp[a];
      float p = (pg[a * ovox + j] + 1.0f) * 0.5f * (d - 1);
      live[a] = true;
      // The negated comparison also routes NaN coordinates to the clamped
      // branch; casting NaN to int below would be undefined behaviour.
      if (!(p > 0.0f)) {
        p = 0.0f;
        live[a] = false;
      } else if (p >= static_cast<float>(d - 1)) {
        p = static_cast<float>(d - 1);
        live[a] = false;
      }
      int base = d == 1 ? 0 : std::min(static_cast<int>(p), d - 2);
      i0[a] = base;
      t[a] = p - base;
      if (d == 1) live[a] = false;
    }
  };

  for (std::int64_t j = 0; j < ovox; ++j) {
    int i0[3];
    float t[3];
    bool live[3];
    sample_geometry(j, i0, t, live);
    for (int m = 0; m < corners; ++m) {
      float w = 1.0f;
      std::int64_t src = 0;
      for (int a = 0; a < nsp; ++a) {
        const int bit = (m >> a) & 1;
        w *= bit ? t[a] : 1.0f - t[a];
        src += std::min(i0[a] + bit, isp[a] - 1) * ist[a];
      }
      if (w == 0.0f) continue;
      for (int ch = 0; ch < c; ++ch)
        out[ch * ovox + j] += w * pin[ch * ivox + src];
    }
  }

  auto iin = input.impl();
  auto ig = grid.impl();
  return make_result(
      std::move(shape), std::move(out), {input, grid},
      [iin, ig, isp, ist, nsp, c, ivox, ovox, corners](TensorImpl& o) {
        const bool want_in = iin->tracked();
        const bool want_g = ig->tracked();
        if (!want_in && !want_g) return;
        if (want_in) iin->ensure_grad();
        if (want_g) ig->ensure_grad();
        const float* pin = iin->data.data();
        const float* pg = ig->data.data();
        for (std::int64_t j = 0; j < ovox; ++j) {
          int i0[3];
          float t[3];
          bool live[3];
          for (int a = 0; a < nsp; ++a) {
            const int d = isp[a];
            float p = (pg[a * ovox + j] + 1.0f) * 0.5f * (d - 1);
            live[a] = true;
            if (p <= 0.0f) {
              p = 0.0f;
              live[a] = false;
            } else if (p >= static_cast<float>(d - 1)) {
              p = static_cast<float>(d - 1);
              live[a] = false;
            }
            int base = d == 1 ? 0 : std::min(static_cast<int>(p), d - 2);
            i0[a] = base;
            t[a] = p - base;
            if (d == 1) live[a] = false;
          }
          for (int m = 0; m < corners; ++m) {
            std::int64_t src = 0;
            float w = 1.0f;
            for (int a = 0; a < nsp; ++a) {
              const int bit = (m >> a) & 1;
              w *= bit ? t[a] : 1.0f - t[a];
              src += std::min(i0[a] + bit, isp[a] - 1) * ist[a];
            }
            if (want_in && w != 0.0f) {
              for (int ch = 0; ch < c; ++ch)
                iin->grad[ch * ivox + src] += w * o.grad[ch * ovox + j];
            }
            if (want_g) {
              // d(out)/d(grid_a) = sum over corners of dw/dt_a * value,
              // scaled by dt/dgrid = (d-1)/2; clamped axes contribute 0.
              for (int a = 0; a < nsp; ++a) {
                if (!live[a]) continue;
                const int bit = (m >> a) & 1;
                float dw = bit ? 1.0f : -1.0f;
                for (int b = 0; b < nsp; ++b) {
                  if (b == a) continue;
                  const int bb = (m >> b) & 1;
                  dw *= bb ? t[b] : 1.0f - t[b];
                }
                if (dw == 0.0f) continue;
                float acc = 0.0f;
                for (int ch = 0; ch < c; ++ch)
                  acc += o.grad[ch * ovox + j] * pin[ch * ivox + src];
                ig->grad[a * ovox + j] +=
                    acc * dw * 0.5f * (isp[a] - 1);
              }
            }
          }
        }
      });
}

Tensor upsample_linear(const Tensor& input, const std::vector<int>& out_spatial) {
  const int nsp = input.rank() - 1;
  require(static_cast<int>(out_spatial.size()) == nsp,
          "upsample_linear: spatial rank mismatch");
  // Identity grid at the target resolution addresses the same normalized
  // locations regardless of the source resolution.
  std::vector<int> gshape{nsp};
  gshape.insert(gshape.end(), out_spatial.begin(), out_spatial.end());
  std::int64_t ovox = 1;
  for (int d : out_spatial) {
    require(d >= 2, "upsample_linear: target extents must be >= 2");
    ovox *= d;
  }
  std::vector<float> g(static_cast<size_t>(nsp) * ovox);
  auto ost = strides_of(out_spatial);
  for (int a = 0; a < nsp; ++a) {
    const float inv = 2.0f / (out_spatial[a] - 1);
    for (std::int64_t j = 0; j < ovox; ++j) {
      const int xa = static_cast<int>((j / ost[a]) % out_spatial[a]);
      g[a * ovox + j] = xa * inv - 1.0f;
    }
  }
  return grid_sample(input, Tensor::from_data(std::move(gshape), std::move(g)));
}

Tensor upsample_nearest2(const Tensor& input) {
  const int nsp = input.rank() - 1;
  const int c = input.extent(0);
  std::vector<int> isp = spatial_shape(input.shape());
  std::vector<int> osp(nsp);
  for (int a = 0; a < nsp; ++a) osp[a] = isp[a] * 2;
  const std::int64_t ivox = spatial_size(input.shape());
  std::int64_t ovox = ivox << nsp;
  auto ist = strides_of(isp);
  std::vector<int> shape{c};
  shape.insert(shape.end(), osp.begin(), osp.end());
  std::vector<float> out(static_cast<size_t>(c) * ovox);
  const float* pin = input.data();
  std::vector<int> xi(nsp, 0);
  std::int64_t j = 0;
  do {
    std::int64_t src = 0;
    for (int a = 0; a < nsp; ++a) src += (xi[a] / 2) * ist[a];
    for (int ch = 0; ch < c; ++ch) out[ch * ovox + j] = pin[ch * ivox + src];
    ++j;
  } while (advance(xi, osp));
  auto iin = input.impl();
  return make_result(std::move(shape), std::move(out), {input},
                     [iin, osp, ist, nsp, c, ivox, ovox](TensorImpl& o) {
                       if (!iin->tracked()) return;
                       iin->ensure_grad();
                       std::vector<int> xi(nsp, 0);
                       std::int64_t j = 0;
                       do {
                         std::int64_t src = 0;
                         for (int a = 0; a < nsp; ++a)
                           src += (xi[a] / 2) * ist[a];
                         for (int ch = 0; ch < c; ++ch)
                           iin->grad[ch * ivox + src] += o.grad[ch * ovox + j];
                         ++j;
                       } while (advance(xi, osp));
                     });
}

Tensor forward_diff_sq_sum(const Tensor& x) {
  const int nsp = x.rank() - 1;
  require(nsp >= 1, "forward_diff_sq_sum: spatial axes required");
  const int c = x.extent(0);
  std::vector<int> sp = spatial_shape(x.shape());
  const std::int64_t vox = spatial_size(x.shape());
  auto st = strides_of(sp);
  const float* px = x.data();
  double acc = 0.0;
  for (int ch = 0; ch < c; ++ch) {
    const float* base = px + static_cast<std::int64_t>(ch) * vox;
    std::vector<int> xi(nsp, 0);
    std::int64_t j = 0;
    do {
      for (int a = 0; a < nsp; ++a) {
        if (xi[a] + 1 >= sp[a]) continue;
        const float d = base[j + st[a]] - base[j];
        acc += static_cast<double>(d) * d;
      }
      ++j;
    } while (advance(xi, sp));
  }
  auto ix = x.impl();
  return make_result({1}, {static_cast<float>(acc)}, {x},
                     [ix, sp, st, nsp, c, vox](TensorImpl& o) {
                       if (!ix->tracked()) return;
                       ix->ensure_grad();
                       const float g = o.grad[0];
                       for (int ch = 0; ch < c; ++ch) {
                         const std::int64_t off =
                             static_cast<std::int64_t>(ch) * vox;
                         std::vector<int> xi(nsp, 0);
                         std::int64_t j = 0;
                         do {
                           for (int a = 0; a < nsp; ++a) {
                             if (xi[a] + 1 >= sp[a]) continue;
                             const float d = ix->data[off + j + st[a]] -
                                             ix->data[off + j];
                             ix->grad[off + j + st[a]] += 2.0f * d * g;
                             ix->grad[off + j] -= 2.0f * d * g;
                           }
                           ++j;
                         } while (advance(xi, sp));
                       }
                     });
}

Tensor flip_spatial(const Tensor& x, const std::vector<bool>& flip) {
  const int nsp = x.rank() - 1;
  require(static_cast<int>(flip.size()) == nsp,
          "flip_spatial: flag per spatial axis required");
  const int c = x.extent(0);
  std::vector<int> sp = spatial_shape(x.shape());
  const std::int64_t vox = spatial_size(x.shape());
  auto st = strides_of(sp);
  std::vector<float> out(x.size());
  const float* px = x.data();
  std::vector<int> xi(nsp, 0);
  std::int64_t j = 0;
  do {
    std::int64_t src = 0;
    for (int a = 0; a < nsp; ++a) {
      const int s = flip[a] ? sp[a] - 1 - xi[a] : xi[a];
      src += s * st[a];
    }
    for (int ch = 0; ch < c; ++ch) out[ch * vox + j] = px[ch * vox + src];
    ++j;
  } while (advance(xi, sp));
  return Tensor::from_data(x.shape(), std::move(out));
}

}  // namespace gridreg
