#include "gridreg/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "binary_io.hpp"
#include "gridreg/ops.hpp"

namespace gridreg {

AdamState init_adam(const std::vector<std::pair<std::string, Tensor>>& params,
                    const AdamConfig& config) {
  AdamState st;
  st.config = config;
  for (const auto& [name, p] : params) {
    st.m.emplace_back(static_cast<size_t>(p.size()), 0.0f);
    st.v.emplace_back(static_cast<size_t>(p.size()), 0.0f);
  }
  return st;
}

void adam_step(const std::vector<std::pair<std::string, Tensor>>& params,
               AdamState& state) {
  require(params.size() == state.m.size(), "adam_step: parameter count mismatch");
  const auto& c = state.config;
  ++state.step;
  const float bc1 = 1.0f - std::pow(c.beta1, static_cast<float>(state.step));
  const float bc2 = 1.0f - std::pow(c.beta2, static_cast<float>(state.step));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi].second;
    require(state.m[pi].size() == static_cast<size_t>(p.size()),
            "adam_step: moment shape mismatch for " + params[pi].first);
    float* theta = p.data();
    const float* g = p.grad();
    float* m = state.m[pi].data();
    float* v = state.v[pi].data();
    for (std::int64_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0f - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0f - c.beta2) * g[i] * g[i];
      const float mhat = m[i] / bc1;
      const float vhat = v[i] / bc2;
      theta[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
      theta[i] -= c.lr * c.weight_decay * theta[i];
    }
  }
}

std::pair<Tensor, Tensor> augment_flip(const Tensor& fixed,
                                       const Tensor& moving, Rng& rng) {
  require(fixed.shape() == moving.shape(), "augment_flip: shape mismatch");
  const int nsp = fixed.rank() - 1;
  std::vector<bool> flips(nsp);
  bool any = false;
  for (int a = 0; a < nsp; ++a) {
    flips[a] = rng.next_bool();
    any = any || flips[a];
  }
  if (!any) return {fixed, moving};
  return {flip_spatial(fixed, flips), flip_spatial(moving, flips)};
}

namespace {

void write_entry(detail::ByteWriter& w, const std::string& name,
                 const std::vector<int>& shape, const float* data,
                 std::int64_t n) {
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.raw(name.data(), name.size());
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (int d : shape) w.u32(static_cast<std::uint32_t>(d));
  w.f32_array(data, static_cast<size_t>(n));
}

constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const Model& model, const AdamState& state,
                     const std::string& path) {
  const auto params = model.named_params();
  detail::ByteWriter w;
  w.raw("IGCK", 4);
  w.u32(kCheckpointVersion);

  // meta.config payload: levels, nspatial, variant, enc_kernel, pe_kernel,
  // slope, channels[levels], window half-widths [levels x nspatial].
  const auto& cfg = model.config;
  std::vector<float> meta{static_cast<float>(cfg.levels),
                          static_cast<float>(cfg.nspatial),
                          cfg.variant == Variant::kLite ? 1.0f : 0.0f,
                          static_cast<float>(cfg.encoder_kernel),
                          static_cast<float>(cfg.pe_kernel),
                          cfg.leaky_slope};
  for (int l = 0; l < cfg.levels; ++l)
    meta.push_back(static_cast<float>(cfg.channels[l]));
  for (int l = 0; l < cfg.levels; ++l)
    for (int h : cfg.window_at(l).half) meta.push_back(static_cast<float>(h));
  std::vector<float> opt_meta{static_cast<float>(state.step),
                              state.config.lr, state.config.beta1,
                              state.config.beta2, state.config.eps,
                              state.config.weight_decay};

  w.u32(static_cast<std::uint32_t>(2 + 3 * params.size()));
  write_entry(w, "meta.config", {static_cast<int>(meta.size())}, meta.data(),
              static_cast<std::int64_t>(meta.size()));
  write_entry(w, "meta.optimizer", {static_cast<int>(opt_meta.size())},
              opt_meta.data(), static_cast<std::int64_t>(opt_meta.size()));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const auto& [name, p] = params[pi];
    write_entry(w, name, p.shape(), p.data(), p.size());
    const int n = static_cast<int>(state.m[pi].size());
    write_entry(w, "opt.m." + name, {n}, state.m[pi].data(), n);
    write_entry(w, "opt.v." + name, {n}, state.v[pi].data(), n);
  }
  detail::write_file_atomic(path, w.bytes());
}

Checkpoint load_checkpoint(const std::string& path) {
  detail::ByteReader r(detail::read_file(path), path);
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::string(magic, 4) != "IGCK")
    throw detail::format_error(path + ": bad magic, expected IGCK");
  const auto version = r.u32("version");
  if (version != kCheckpointVersion)
    throw detail::format_error(path + ": unsupported checkpoint version " +
                               std::to_string(version));
  const auto count = r.u32("entry count");

  struct Entry {
    std::vector<int> shape;
    std::vector<float> data;
  };
  std::vector<std::pair<std::string, Entry>> entries;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = r.u32("name length");
    std::string name(name_len, '\0');
    r.raw(name.data(), name_len, "entry name");
    const int rank = r.u8("entry rank");
    Entry ent;
    std::int64_t n = 1;
    for (int a = 0; a < rank; ++a) {
      const int d = static_cast<int>(r.u32("entry extent"));
      ent.shape.push_back(d);
      n *= d;
    }
    ent.data.resize(static_cast<size_t>(n));
    for (auto& v : ent.data) v = r.f32("entry payload");
    entries.emplace_back(std::move(name), std::move(ent));
  }

  auto find = [&](const std::string& name) -> Entry& {
    for (auto& [n, e] : entries)
      if (n == name) return e;
    throw detail::format_error(path + ": missing checkpoint entry " + name);
  };

  const auto& meta = find("meta.config").data;
  if (meta.size() < 6)
    throw detail::format_error(path + ": malformed meta.config entry");
  ModelConfig cfg;
  cfg.levels = static_cast<int>(meta[0]);
  cfg.nspatial = static_cast<int>(meta[1]);
  cfg.variant = meta[2] != 0.0f ? Variant::kLite : Variant::kFull;
  cfg.encoder_kernel = static_cast<int>(meta[3]);
  cfg.pe_kernel = static_cast<int>(meta[4]);
  cfg.leaky_slope = meta[5];
  size_t at = 6;
  if (meta.size() < at + cfg.levels * (1 + cfg.nspatial))
    throw detail::format_error(path + ": malformed meta.config entry");
  cfg.channels.clear();
  for (int l = 0; l < cfg.levels; ++l)
    cfg.channels.push_back(static_cast<int>(meta[at++]));
  for (int l = 0; l < cfg.levels; ++l) {
    SearchWindow w;
    for (int a = 0; a < cfg.nspatial; ++a)
      w.half.push_back(static_cast<int>(meta[at++]));
    cfg.windows.push_back(std::move(w));
  }

  Checkpoint ck;
  ck.model = init_model(0, cfg);
  auto params = ck.model.named_params();
  ck.optimizer = init_adam(params, AdamConfig{});
  const auto& opt_meta = find("meta.optimizer").data;
  if (opt_meta.size() != 6)
    throw detail::format_error(path + ": malformed meta.optimizer entry");
  ck.optimizer.step = static_cast<std::int64_t>(opt_meta[0]);
  ck.optimizer.config.lr = opt_meta[1];
  ck.optimizer.config.beta1 = opt_meta[2];
  ck.optimizer.config.beta2 = opt_meta[3];
  ck.optimizer.config.eps = opt_meta[4];
  ck.optimizer.config.weight_decay = opt_meta[5];

  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& [name, p] = params[pi];
    Entry& ent = find(name);
    if (ent.shape != p.shape())
      throw detail::format_error(path + ": shape mismatch for entry " + name);
    std::copy(ent.data.begin(), ent.data.end(), p.data());
    Entry& em = find("opt.m." + name);
    Entry& ev = find("opt.v." + name);
    if (em.data.size() != static_cast<size_t>(p.size()) ||
        ev.data.size() != static_cast<size_t>(p.size()))
      throw detail::format_error(path + ": moment size mismatch for entry " +
                                 name);
    ck.optimizer.m[pi] = em.data;
    ck.optimizer.v[pi] = ev.data;
  }
  return ck;
}

TrainResult train(const PairSource& pairs, const TrainConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);

  TrainResult res;
  res.model = init_model(config.seed, config.model);
  auto params = res.model.named_params();
  res.optimizer = init_adam(params, config.adam);
  res.checkpoint_path = (fs::path(config.out_dir) / "checkpoint.igck").string();
  res.loss_log_path = (fs::path(config.out_dir) / "loss.log").string();

  std::FILE* log = std::fopen(res.loss_log_path.c_str(), "wb");
  if (!log)
    throw detail::io_error(res.loss_log_path + ": cannot open loss log");

  Rng data_rng(config.seed ^ 0x5eed5eed5eed5eedULL);
  Rng flip_rng(config.seed ^ 0xf11bf11bf11bf11bULL);
  for (int it = 0; it < config.iterations; ++it) {
    auto [fixed, moving] = pairs(data_rng);
    if (config.augment)
      std::tie(fixed, moving) = augment_flip(fixed, moving, flip_rng);

    DecodeTrace trace = forward(fixed, moving, res.model);
    LossTerms terms = loss(trace, fixed, config.lambda);
    const double total = terms.total.item();
    if (!std::isfinite(total)) {
      std::fclose(log);
      std::string dump = "non-finite loss at iteration " + std::to_string(it) +
                         "; parameter norms:";
      for (const auto& [name, p] : params) {
        double norm = 0.0;
        for (std::int64_t i = 0; i < p.size(); ++i)
          norm += static_cast<double>(p.data()[i]) * p.data()[i];
        dump += "\n  " + name + " = " + std::to_string(std::sqrt(norm));
      }
      throw numerical_error(dump);
    }
    if (it == 0) res.first_similarity = terms.similarity;
    res.final_similarity = terms.similarity;
    std::fprintf(log, "%d\t%.9g\t%.9g\t%.9g\n", it, terms.similarity,
                 terms.smoothness, total);

    for (auto& [name, p] : params) p.zero_grad();
    backward(terms.total);
    adam_step(params, res.optimizer);

    if (config.checkpoint_every > 0 && (it + 1) % config.checkpoint_every == 0)
      save_checkpoint(res.model, res.optimizer, res.checkpoint_path);
  }
  std::fclose(log);
  save_checkpoint(res.model, res.optimizer, res.checkpoint_path);
  return res;
}

}  // namespace gridreg
