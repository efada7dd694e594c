#include "gridreg/coordtrans.hpp"

#include <algorithm>
#include <cmath>

#include "gridreg/ops.hpp"

namespace gridreg {

Tensor positional_embedding(const std::vector<int>& extents) {
  const int n = static_cast<int>(extents.size());
  require(n >= 1 && n <= 3, "positional_embedding: 1-3 axes supported");
  std::int64_t vox = 1;
  for (int d : extents) {
    require(d >= 2, "positional_embedding: extents must be >= 2");
    vox *= d;
  }
  auto st = strides_of(extents);
  std::vector<int> shape{2 * n};
  shape.insert(shape.end(), extents.begin(), extents.end());
  std::vector<float> data(static_cast<size_t>(2 * n) * vox);
  for (int a = 0; a < n; ++a) {
    const double w = M_PI / (extents[a] - 1);
    for (std::int64_t j = 0; j < vox; ++j) {
      const int xa = static_cast<int>((j / st[a]) % extents[a]);
      data[(2 * a) * vox + j] = static_cast<float>(std::cos(xa * w));
      data[(2 * a + 1) * vox + j] = static_cast<float>(std::sin(xa * w));
    }
  }
  return Tensor::from_data(std::move(shape), std::move(data));
}

float pe_cross_correlation(const std::vector<int>& x1,
                           const std::vector<int>& x2,
                           const std::vector<int>& extents) {
  require(x1.size() == extents.size() && x2.size() == extents.size(),
          "pe_cross_correlation: coordinate rank mismatch");
  double acc = 0.0;
  for (size_t a = 0; a < extents.size(); ++a) {
    const double dx = static_cast<double>(x1[a]) - x2[a];
    acc += std::cos(dx * M_PI / (extents[a] - 1));
  }
  return static_cast<float>(acc);
}

PositionalEncodingParams make_pe_params(int channels, int nspatial,
                                        int kernel_size) {
  std::vector<int> kshape{channels, channels};
  for (int a = 0; a < nspatial; ++a) kshape.push_back(kernel_size);
  std::vector<int> kshape2{2 * nspatial, channels};
  for (int a = 0; a < nspatial; ++a) kshape2.push_back(kernel_size);
  PositionalEncodingParams p;
  p.kernel = Tensor::zeros(std::move(kshape), /*requires_grad=*/true);
  p.bias = Tensor::zeros({channels}, /*requires_grad=*/true);
  p.kernel2 = Tensor::zeros(std::move(kshape2), /*requires_grad=*/true);
  p.bias2 = Tensor::zeros({2 * nspatial}, /*requires_grad=*/true);
  p.alpha = Tensor::scalar(1.0f, /*requires_grad=*/true);
  return p;
}

Tensor encode(const Tensor& features, const PositionalEncodingParams& params) {
  Tensor pe = positional_embedding(spatial_shape(features.shape()));
  Tensor mixed = add(conv(features, params.kernel2, params.bias2), pe);
  return concat_channels(conv(features, params.kernel, params.bias),
                         scale_by(mixed, params.alpha));
}

SamplingGrid coordinate_translator_dense(const Tensor& f_enc,
                                         const Tensor& m_enc) {
  require(f_enc.shape() == m_enc.shape(),
          "coordinate_translator_dense: feature shape mismatch");
  auto sp = spatial_shape(f_enc.shape());
  Tensor scores = matmul(to_matrix(f_enc), transpose2d(to_matrix(m_enc)));
  Tensor probs = softmax_rows(scores);
  Tensor coords = matmul(probs, identity_grid_matrix(sp));
  return {from_matrix(coords, sp)};
}

namespace {

// Candidate neighborhoods truncate symmetrically near the volume border:
// the per-axis half-width shrinks to what fits on both sides. A window
// that is symmetric about x makes the softmax-weighted coordinate equal
// x exactly whenever the scores depend only on |offset| (the PE-only
// state at initialization), so the translator starts at the identity
// grid everywhere, border voxels included.
struct WindowWalker {
  std::vector<int> sp;
  std::vector<std::int64_t> st;
  std::vector<int> half;
  int nsp;

  // Calls emit(flat_candidate) for each candidate of voxel xi.
  template <typename F>
  void for_candidates(const std::vector<int>& xi, std::int64_t j,
                      F&& emit) const {
    int heff[3];
    for (int a = 0; a < nsp; ++a)
      heff[a] = std::min({half[a], xi[a], sp[a] - 1 - xi[a]});
    std::int64_t flat = j;
    int off[3];
    for (int a = 0; a < nsp; ++a) {
      off[a] = -heff[a];
      flat += off[a] * st[a];
    }
    for (;;) {
      emit(flat);
      int a = nsp - 1;
      for (; a >= 0; --a) {
        if (off[a] < heff[a]) {
          ++off[a];
          flat += st[a];
          break;
        }
        flat -= 2 * heff[a] * st[a];
        off[a] = -heff[a];
      }
      if (a < 0) break;
    }
  }
};

}  // namespace

SamplingGrid coordinate_translator_windowed(const Tensor& f_enc,
                                            const Tensor& m_enc,
                                            const SearchWindow& window) {
  require(f_enc.shape() == m_enc.shape(),
          "coordinate_translator_windowed: feature shape mismatch");
  const int nsp = f_enc.rank() - 1;
  require(static_cast<int>(window.half.size()) == nsp,
          "coordinate_translator_windowed: window rank mismatch");
  for (int h : window.half)
    require(h >= 0, "coordinate_translator_windowed: negative half-width");
  const auto sp = spatial_shape(f_enc.shape());
  const int c = f_enc.extent(0);
  const std::int64_t vox = spatial_size(f_enc.shape());
  const std::int64_t kmax = window.candidate_count();

  WindowWalker walker{sp, strides_of(sp), window.half, nsp};
  const Tensor id = identity_grid(sp).values;

  // Shared forward/backward sweep: computes per-voxel candidates and
  // softmax probabilities, then hands them to `emit`.
  auto sweep = [walker, kmax, nsp, c, vox](const float* f, const float* m,
                                           auto&& emit) {
    std::vector<std::int64_t> cand(static_cast<size_t>(kmax));
    std::vector<float> p(static_cast<size_t>(kmax));
    std::vector<int> xi(nsp, 0);
    std::int64_t j = 0;
    do {
      std::int64_t k = 0;
      walker.for_candidates(xi, j, [&](std::int64_t flat) {
        float acc = 0.0f;
        for (int ch = 0; ch < c; ++ch)
          acc += f[ch * vox + j] * m[ch * vox + flat];
        cand[k] = flat;
        p[k] = acc;
        ++k;
      });
      float mx = p[0];
      for (std::int64_t i = 1; i < k; ++i) mx = std::max(mx, p[i]);
      float denom = 0.0f;
      for (std::int64_t i = 0; i < k; ++i) {
        p[i] = std::exp(p[i] - mx);
        denom += p[i];
      }
      for (std::int64_t i = 0; i < k; ++i) p[i] /= denom;
      emit(j, k, cand.data(), p.data());
      ++j;
      int a = nsp - 1;
      for (; a >= 0; --a) {
        if (++xi[a] < walker.sp[a]) break;
        xi[a] = 0;
      }
      if (a < 0) break;
    } while (true);
  };

  std::vector<int> shape{nsp};
  shape.insert(shape.end(), sp.begin(), sp.end());
  std::vector<float> out(static_cast<size_t>(nsp) * vox, 0.0f);
  const float* pid = id.data();
  sweep(f_enc.data(), m_enc.data(),
        [&](std::int64_t j, std::int64_t k, const std::int64_t* cand,
            const float* p) {
          for (std::int64_t i = 0; i < k; ++i)
            for (int a = 0; a < nsp; ++a)
              out[a * vox + j] += p[i] * pid[a * vox + cand[i]];
        });

  auto iff = f_enc.impl();
  auto imm = m_enc.impl();
  Tensor result = make_result(
      std::move(shape), std::move(out), {f_enc, m_enc},
      [iff, imm, id, sweep, kmax, nsp, c, vox](TensorImpl& o) {
        const bool want_f = iff->tracked();
        const bool want_m = imm->tracked();
        if (!want_f && !want_m) return;
        if (want_f) iff->ensure_grad();
        if (want_m) imm->ensure_grad();
        const float* pid = id.data();
        const float* pf = iff->data.data();
        const float* pm = imm->data.data();
        std::vector<float> gi(static_cast<size_t>(kmax));
        sweep(pf, pm,
              [&](std::int64_t j, std::int64_t k, const std::int64_t* cand,
                  const float* p) {
                float dot = 0.0f;
                for (std::int64_t i = 0; i < k; ++i) {
                  float g = 0.0f;
                  for (int a = 0; a < nsp; ++a)
                    g += o.grad[a * vox + j] * pid[a * vox + cand[i]];
                  gi[i] = g;
                  dot += p[i] * g;
                }
                for (std::int64_t i = 0; i < k; ++i) {
                  const float ds = p[i] * (gi[i] - dot);
                  if (ds == 0.0f) continue;
                  for (int ch = 0; ch < c; ++ch) {
                    if (want_f)
                      iff->grad[ch * vox + j] += ds * pm[ch * vox + cand[i]];
                    if (want_m)
                      imm->grad[ch * vox + cand[i]] += ds * pf[ch * vox + j];
                  }
                }
              });
      });
  return {result};
}

}  // namespace gridreg
