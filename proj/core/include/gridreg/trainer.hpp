#pragma once

#include <functional>
#include <string>

#include "gridreg/model.hpp"

namespace gridreg {

// Raised when training hits a non-finite loss; carries a diagnostic dump.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  float lr = 3e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 1e-9f;  // decoupled: applied as -lr*wd*theta
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<float>> m;  // first moments, per parameter
  std::vector<std::vector<float>> v;  // second moments
};

AdamState init_adam(const std::vector<std::pair<std::string, Tensor>>& params,
                    const AdamConfig& config);

// Bias-corrected Adam update; reads gradients from the tensors' grad
// buffers and mutates parameter data in place.
void adam_step(const std::vector<std::pair<std::string, Tensor>>& params,
               AdamState& state);

// Applies one shared flip pattern (a coin per spatial axis) to both
// images of a pair.
std::pair<Tensor, Tensor> augment_flip(const Tensor& fixed,
                                       const Tensor& moving, Rng& rng);

struct TrainConfig {
  ModelConfig model;
  AdamConfig adam;
  int iterations = 1000;
  float lambda = 1.0f;
  std::uint64_t seed = 0;
  bool augment = false;
  int checkpoint_every = 0;  // 0 = only at the end
  std::string out_dir = ".";
};

// Yields one (fixed, moving) pair per iteration.
using PairSource = std::function<std::pair<Tensor, Tensor>(Rng&)>;

struct TrainResult {
  Model model;
  AdamState optimizer;
  std::string checkpoint_path;
  std::string loss_log_path;
  double first_similarity = 0.0;
  double final_similarity = 0.0;
};

// Runs forward/loss/backward/adam_step for config.iterations steps,
// writing "iter<TAB>sim<TAB>smooth<TAB>total" lines and periodic
// checkpoints under config.out_dir.
TrainResult train(const PairSource& pairs, const TrainConfig& config);

// Checkpoint file: magic "IGCK", u32 version, u32 entry count, then
// entries of (u32 name length, utf-8 name, u8 rank, rank x u32 extents,
// float32 payload), little-endian throughout. Round-trips bitwise.
void save_checkpoint(const Model& model, const AdamState& state,
                     const std::string& path);
struct Checkpoint {
  Model model;
  AdamState optimizer;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gridreg
