// gridreg: deformable image registration from the command line.
//
// Subcommands: train, register, eval, synth, gradcheck, visualize.
// Exit codes: 0 success, 2 usage/file errors, 3 numerical aborts.

#include <cstdio>
#include <filesystem>
#include <exception>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gridreg/gradcheck.hpp"
#include "gridreg/metrics.hpp"
#include "gridreg/model.hpp"
#include "gridreg/ops.hpp"
#include "gridreg/synthdata.hpp"
#include "gridreg/trainer.hpp"
#include "gridreg/volume_io.hpp"

namespace {

using namespace gridreg;

std::vector<int> parse_extents(const std::string& s) {
  std::vector<int> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(std::stoi(s.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  require(!out.empty(), "empty size spec");
  return out;
}

// "1,1;1,1;0,0" -> one window per level, finest first.
std::vector<SearchWindow> parse_windows(const std::string& s) {
  std::vector<SearchWindow> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t semi = s.find(';', pos);
    if (semi == std::string::npos) semi = s.size();
    out.push_back({parse_extents(s.substr(pos, semi - pos))});
    pos = semi + 1;
  }
  return out;
}

std::string format_windows(const ModelConfig& config) {
  std::string s;
  for (int l = 0; l < config.levels; ++l) {
    if (l) s += ";";
    const SearchWindow w = config.window_at(l);
    for (size_t a = 0; a < w.half.size(); ++a) {
      if (a) s += ",";
      s += std::to_string(w.half[a]);
    }
  }
  return s;
}

void print_config(const std::string& command, std::uint64_t seed,
                  const ModelConfig& config, float lambda,
                  const std::string& extra = "") {
  std::printf(
      "config: command=%s seed=%llu variant=%s levels=%d lambda=%g "
      "windows=%s%s%s\n",
      command.c_str(), static_cast<unsigned long long>(seed),
      config.variant == Variant::kLite ? "lite" : "full", config.levels,
      lambda, format_windows(config).c_str(), extra.empty() ? "" : " ",
      extra.c_str());
  std::fflush(stdout);
}

struct TrainFlags {
  TrainConfig config;
  std::string variant = "lite";
  std::string windows;
  std::string channels;
  std::string size = "64,64";
  std::string fixed_path, moving_path;
  bool synth_blobs = false;
  bool synth_shift = false;
  int blobs = 6;
  double amplitude = 3.0;
  double frequency = 1.0;
};

void resolve_model_flags(ModelConfig& m, const std::string& variant,
                         const std::string& windows,
                         const std::string& channels, int nspatial) {
  m.nspatial = nspatial;
  if (variant == "full")
    m.variant = Variant::kFull;
  else if (variant == "lite")
    m.variant = Variant::kLite;
  else
    throw contract_error("unknown variant '" + variant + "'");
  if (!windows.empty()) m.windows = parse_windows(windows);
  if (!channels.empty()) m.channels = parse_extents(channels);
  require(static_cast<int>(m.channels.size()) >= m.levels,
          "need one channel count per level");
}

SamplingGrid constant_shift_grid(const std::vector<int>& extents,
                                 double amplitude) {
  SamplingGrid g = identity_grid(extents);
  float* p = g.values.data();
  const std::int64_t vox = spatial_size(g.values.shape());
  for (size_t a = 0; a < extents.size(); ++a) {
    const float step = static_cast<float>(2.0 * amplitude / (extents[a] - 1));
    for (std::int64_t i = 0; i < vox; ++i) p[a * vox + i] += step;
  }
  return g;
}

RegistrationPair make_synth_pair(const TrainFlags& f, std::uint64_t seed) {
  const std::vector<int> extents = parse_extents(f.size);
  SyntheticScene scene = make_blob_scene(seed, extents, f.blobs);
  SamplingGrid warp =
      f.synth_shift
          ? constant_shift_grid(extents, f.amplitude)
          : make_smooth_deformation(seed, extents, f.amplitude, f.frequency);
  return make_pair(scene, warp);
}

int cmd_train(const TrainFlags& f0) {
  TrainFlags f = f0;
  const bool file_pair = !f.fixed_path.empty();
  require(static_cast<int>(f.synth_blobs) + static_cast<int>(f.synth_shift) +
                  static_cast<int>(file_pair) ==
              1,
          "pick exactly one data source: --synth-blobs, --synth-shift, or "
          "--fixed/--moving");
  Tensor fixed, moving;
  if (file_pair) {
    require(!f.moving_path.empty(), "--fixed requires --moving");
    fixed = read_image(f.fixed_path);
    moving = read_image(f.moving_path);
  } else {
    RegistrationPair pair = make_synth_pair(f, f.config.seed);
    fixed = pair.fixed;
    moving = pair.moving;
  }
  f.config.model.nspatial = fixed.rank() - 1;
  resolve_model_flags(f.config.model, f.variant, f.windows, f.channels,
                      fixed.rank() - 1);
  print_config("train", f.config.seed, f.config.model, f.config.lambda,
               "lr=" + std::to_string(f.config.adam.lr) +
                   " iters=" + std::to_string(f.config.iterations));

  PairSource source = [fixed, moving](Rng&) {
    return std::make_pair(fixed, moving);
  };
  TrainResult result = train(source, f.config);
  std::printf("checkpoint: %s\nloss-log: %s\n",
              result.checkpoint_path.c_str(), result.loss_log_path.c_str());
  std::printf("similarity: first=%.9g final=%.9g\n", result.first_similarity,
              result.final_similarity);
  return 0;
}

struct RegisterFlags {
  std::string checkpoint, fixed, moving;
  std::string out_warped = "warped.vol";
  std::string out_grid = "registered.grid";
};

int cmd_register(const RegisterFlags& f) {
  Checkpoint ckpt = load_checkpoint(f.checkpoint);
  Tensor fixed = read_image(f.fixed);
  Tensor moving = read_image(f.moving);
  print_config("register", 0, ckpt.model.config, 0.0f,
               "checkpoint=" + f.checkpoint);
  DecodeTrace trace = forward(fixed, moving, ckpt.model);
  write_volume(trace.warped, f.out_warped);
  write_grid(trace.full_grid, f.out_grid);
  std::printf("wrote %s and %s\n", f.out_warped.c_str(), f.out_grid.c_str());
  return 0;
}

struct EvalFlags {
  std::string grid, fixed_labels, moving_labels;
};

int cmd_eval(const EvalFlags& f) {
  SamplingGrid grid = read_grid(f.grid);
  LabelVolume fixed = read_labels(f.fixed_labels);
  LabelVolume moving = read_labels(f.moving_labels);
  require(fixed.extents == grid.spatial() && moving.extents == grid.spatial(),
          "label volumes must share extents with the grid");
  ModelConfig dummy;
  dummy.nspatial = grid.ndim();
  print_config("eval", 0, dummy, 0.0f, "grid=" + f.grid);

  LabelVolume warped = warp_labels(moving, grid);
  std::set<std::int32_t> vocab;
  for (std::int32_t v : fixed.vocabulary()) vocab.insert(v);
  for (std::int32_t v : moving.vocabulary()) vocab.insert(v);

  PairReport report;
  report.pair_id = "pair0";
  report.dice = mean_dice(fixed, warped,
                          std::vector<std::int32_t>(vocab.begin(), vocab.end()));
  report.neg_jacobian = neg_jacobian_stats(grid);
  report.sd_log_j = sd_log_jacobian(grid);
  for (const DiceRow& row : report.dice.per_label) {
    if (row.both_empty) continue;
    if (boundary_voxels(fixed, row.label).empty() ||
        boundary_voxels(warped, row.label).empty())
      continue;
    report.hd95_per_label.emplace_back(row.label,
                                       hd95(fixed, warped, row.label));
  }
  std::fputs(format_report({report}).c_str(), stdout);
  return 0;
}

struct SynthFlags {
  std::string size = "64,64";
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int blobs = 6;
  double amplitude = 3.0;
  double frequency = 1.0;
};

int cmd_synth(const SynthFlags& f) {
  ModelConfig dummy;
  const std::vector<int> extents = parse_extents(f.size);
  dummy.nspatial = static_cast<int>(extents.size());
  print_config("synth", f.seed, dummy, 0.0f,
               "size=" + f.size + " blobs=" + std::to_string(f.blobs));
  SyntheticScene scene = make_blob_scene(f.seed, extents, f.blobs);
  SamplingGrid warp =
      make_smooth_deformation(f.seed, extents, f.amplitude, f.frequency);
  RegistrationPair pair = make_pair(scene, warp);
  std::filesystem::create_directories(f.out_dir);
  write_volume(pair.fixed, f.out_dir + "/fixed.vol");
  write_volume(pair.moving, f.out_dir + "/moving.vol");
  write_volume(pair.fixed_labels, f.out_dir + "/fixed_labels.vol");
  write_volume(pair.moving_labels, f.out_dir + "/moving_labels.vol");
  write_grid(pair.ground_truth, f.out_dir + "/truth.grid");
  std::printf("wrote fixed/moving volumes, labels, and truth.grid under %s\n",
              f.out_dir.c_str());
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& only) {
  ModelConfig dummy;
  print_config("gradcheck", seed, dummy, 0.0f,
               only.empty() ? "" : "only=" + only);
  std::vector<OpGradReport> reports = run_gradcheck_suite(seed, only);
  require(!reports.empty(), "no gradcheck cases match '" + only + "'");
  bool all_pass = true;
  for (const OpGradReport& r : reports) {
    std::printf("%-28s max-rel-err %.3e  tol %.1e  %s\n", r.op.c_str(),
                r.max_rel_err, r.tolerance, r.pass ? "PASS" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

struct VisualizeFlags {
  std::string checkpoint, fixed, moving;
  std::string out_dir = ".";
  int spacing = 4;
  int axis = 0;
  int index = -1;   // -1 = middle slice
  int level = -1;   // -1 = all levels
};

int cmd_visualize(const VisualizeFlags& f) {
  Checkpoint ckpt = load_checkpoint(f.checkpoint);
  Tensor fixed = read_image(f.fixed);
  Tensor moving = read_image(f.moving);
  print_config("visualize", 0, ckpt.model.config, 0.0f,
               "checkpoint=" + f.checkpoint);
  const std::vector<int> sp = spatial_shape(moving.shape());
  const int nsp = static_cast<int>(sp.size());
  require(f.axis >= 0 && f.axis < nsp, "--axis out of range");
  const int index = f.index < 0 ? sp[f.axis] / 2 : f.index;

  DecodeTrace trace = forward(fixed, moving, ckpt.model);
  const int levels = static_cast<int>(trace.composed.size());
  require(f.level < levels, "--level out of range");
  std::filesystem::create_directories(f.out_dir);
  const int finest =
      (ckpt.model.config.variant == Variant::kLite && levels > 1) ? 1 : 0;
  for (int l = levels - 1; l >= finest; --l) {
    if (f.level >= 0 && l != f.level) continue;
    SamplingGrid at_full{upsample_linear(trace.composed[l].values, sp)};
    Tensor warped = grid_sample(moving, at_full.values);
    const std::string stem = f.out_dir + "/level" + std::to_string(l);
    export_slice(warped, f.axis, index, stem + "_warped.pgm");
    export_slice_with_grid(warped, at_full, f.axis, index, f.spacing,
                           stem + "_grid.pgm");
  }
  if (f.level < 0) {
    export_slice(trace.warped, f.axis, index, f.out_dir + "/final_warped.pgm");
    export_slice_with_grid(trace.warped, trace.full_grid, f.axis, index,
                           f.spacing, f.out_dir + "/final_grid.pgm");
  }
  std::printf("wrote per-level PGM images under %s\n", f.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridreg: coarse-to-fine deformable image registration"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from an INI/TOML file");

  TrainFlags tf;
  CLI::App* train = app.add_subcommand("train", "Train a registration model");
  train->add_option("--variant", tf.variant, "full or lite")
      ->check(CLI::IsMember({"full", "lite"}));
  train->add_option("--levels", tf.config.model.levels, "pyramid levels");
  train->add_option("--lambda", tf.config.lambda, "smoothness weight");
  train->add_option("--lr", tf.config.adam.lr, "Adam learning rate");
  train->add_option("--weight-decay", tf.config.adam.weight_decay,
                    "decoupled weight decay");
  train->add_option("--iters", tf.config.iterations, "training iterations");
  train->add_option("--seed", tf.config.seed, "RNG seed");
  train->add_option("--window", tf.windows,
                    "per-level half-widths, e.g. \"1,1;1,1;1,1\"");
  train->add_option("--channels", tf.channels, "per-level encoder channels");
  train->add_option("--out-dir", tf.config.out_dir, "output directory");
  train->add_option("--checkpoint-every", tf.config.checkpoint_every,
                    "periodic checkpoint interval (0 = final only)");
  train->add_flag("--augment", tf.config.augment, "random axis flips");
  train->add_flag("--synth-blobs", tf.synth_blobs,
                  "train on a seeded blob scene with a sinusoidal warp");
  train->add_flag("--synth-shift", tf.synth_shift,
                  "train on a seeded blob scene with a constant shift");
  train->add_option("--size", tf.size, "synthetic extents, e.g. 64,64");
  train->add_option("--blobs", tf.blobs, "synthetic blob count");
  train->add_option("--amplitude", tf.amplitude, "warp amplitude in voxels");
  train->add_option("--frequency", tf.frequency, "warp frequency");
  train->add_option("--fixed", tf.fixed_path, "fixed .vol image");
  train->add_option("--moving", tf.moving_path, "moving .vol image");

  RegisterFlags rf;
  CLI::App* reg = app.add_subcommand("register", "Warp moving toward fixed");
  reg->add_option("--checkpoint", rf.checkpoint)->required();
  reg->add_option("--fixed", rf.fixed)->required();
  reg->add_option("--moving", rf.moving)->required();
  reg->add_option("--out-warped", rf.out_warped);
  reg->add_option("--out-grid", rf.out_grid);

  EvalFlags ef;
  CLI::App* eval = app.add_subcommand("eval", "Score a sampling grid");
  eval->add_option("--grid", ef.grid)->required();
  eval->add_option("--fixed-labels", ef.fixed_labels)->required();
  eval->add_option("--moving-labels", ef.moving_labels)->required();

  SynthFlags sf;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic pair");
  synth->add_option("--size", sf.size);
  synth->add_option("--seed", sf.seed);
  synth->add_option("--blobs", sf.blobs);
  synth->add_option("--amplitude", sf.amplitude);
  synth->add_option("--frequency", sf.frequency);
  synth->add_option("--out-dir", sf.out_dir);

  std::uint64_t gc_seed = 0;
  std::string gc_only;
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference suite");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--only", gc_only, "restrict to matching op names");

  VisualizeFlags vf;
  CLI::App* viz =
      app.add_subcommand("visualize", "Per-level warps and grid overlays");
  viz->add_option("--checkpoint", vf.checkpoint)->required();
  viz->add_option("--fixed", vf.fixed)->required();
  viz->add_option("--moving", vf.moving)->required();
  viz->add_option("--out-dir", vf.out_dir);
  viz->add_option("--spacing", vf.spacing, "grid-line spacing in voxels");
  viz->add_option("--axis", vf.axis, "slicing axis (3D volumes)");
  viz->add_option("--index", vf.index, "slice index (-1 = middle)");
  viz->add_option("--level", vf.level, "single level (-1 = all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(tf);
    if (*reg) return cmd_register(rf);
    if (*eval) return cmd_eval(ef);
    if (*synth) return cmd_synth(sf);
    if (*gc) return cmd_gradcheck(gc_seed, gc_only);
    if (*viz) return cmd_visualize(vf);
  } catch (const numerical_error& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
