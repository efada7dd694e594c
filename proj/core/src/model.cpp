#include "gridreg/model.hpp"

#include "gridreg/ops.hpp"

namespace gridreg {

SearchWindow ModelConfig::window_at(int level) const {
  if (level < static_cast<int>(windows.size())) return windows[level];
  return SearchWindow{std::vector<int>(nspatial, 1)};
}

std::vector<std::pair<std::string, Tensor>> Model::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (size_t l = 0; l < encoder.levels.size(); ++l) {
    const std::string base = "enc.l" + std::to_string(l) + ".";
    out.emplace_back(base + "k1", encoder.levels[l][0]);
    out.emplace_back(base + "b1", encoder.levels[l][1]);
    out.emplace_back(base + "k2", encoder.levels[l][2]);
    out.emplace_back(base + "b2", encoder.levels[l][3]);
  }
  for (size_t l = 0; l < pe.size(); ++l) {
    const std::string base = "pe.l" + std::to_string(l) + ".";
    out.emplace_back(base + "kernel", pe[l].kernel);
    out.emplace_back(base + "bias", pe[l].bias);
    out.emplace_back(base + "kernel2", pe[l].kernel2);
    out.emplace_back(base + "bias2", pe[l].bias2);
    out.emplace_back(base + "alpha", pe[l].alpha);
  }
  return out;
}

Model init_model(std::uint64_t seed, const ModelConfig& config) {
  require(config.levels >= 1, "init_model: at least one level");
  require(config.levels <= static_cast<int>(config.channels.size()),
          "init_model: channel width needed per level");
  Model m;
  m.config = config;
  EncoderConfig ec;
  ec.levels = config.levels;
  ec.channels = config.channels;
  ec.kernel_size = config.encoder_kernel;
  ec.leaky_slope = config.leaky_slope;
  ec.nspatial = config.nspatial;
  m.encoder = init_encoder(seed, ec);
  for (int l = 0; l < config.levels; ++l)
    m.pe.push_back(
        make_pe_params(config.channels[l], config.nspatial, config.pe_kernel));
  return m;
}

DecodeTrace forward(const Tensor& fixed, const Tensor& moving,
                    const Model& model) {
  require(fixed.shape() == moving.shape(), "forward: image shape mismatch");
  const auto& cfg = model.config;
  const int L = cfg.levels;
  const int finest = cfg.variant == Variant::kLite && L > 1 ? 1 : 0;

  FeaturePyramid pf = extract(fixed, model.encoder);
  FeaturePyramid pm = extract(moving, model.encoder);

  DecodeTrace trace;
  trace.level_grids.resize(static_cast<size_t>(L));
  trace.composed.resize(static_cast<size_t>(L));

  SamplingGrid comp;  // running composition, coarsest folded first
  bool have_comp = false;
  for (int l = L - 1; l >= finest; --l) {
    Tensor m_feat = pm.levels[l];
    SamplingGrid comp_up;
    if (have_comp) {
      comp_up = SamplingGrid{
          upsample_linear(comp.values, spatial_shape(m_feat.shape()))};
      m_feat = grid_sample(m_feat, comp_up.values);
    }
    Tensor f_enc = encode(pf.levels[l], model.pe[l]);
    Tensor m_enc = encode(m_feat, model.pe[l]);
    SamplingGrid g =
        coordinate_translator_windowed(f_enc, m_enc, cfg.window_at(l));
    trace.level_grids[l] = g;
    comp = have_comp ? compose(comp_up, g) : g;
    have_comp = true;
    trace.composed[l] = comp;
  }

  const auto full_sp = spatial_shape(fixed.shape());
  trace.full_grid = comp.spatial() == full_sp
                        ? comp
                        : SamplingGrid{upsample_linear(comp.values, full_sp)};
  trace.warped = grid_sample(moving, trace.full_grid.values);
  return trace;
}

LossTerms loss(const DecodeTrace& trace, const Tensor& fixed, float lambda) {
  Tensor diff = sub(fixed, trace.warped);
  Tensor sim = mean(mul(diff, diff));
  Tensor smooth;
  for (const auto& g : trace.level_grids) {
    if (!g.values.defined()) continue;
    Tensor resid = sub(g.values, identity_grid(g.spatial()).values);
    Tensor term = forward_diff_sq_sum(resid);
    smooth = smooth.defined() ? add(smooth, term) : term;
  }
  LossTerms out;
  out.similarity = sim.item();
  out.smoothness = smooth.defined() ? smooth.item() : 0.0;
  out.total = smooth.defined() ? add(sim, scale(smooth, lambda)) : sim;
  return out;
}

}  // namespace gridreg
