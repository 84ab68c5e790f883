#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "core/tensor.h"
#include "losses/losses.h"
#include "nn/networks.h"

namespace dgad {

struct TrainConfig {
  int protocol_id = 1;
  NetConfig net;
  LossWeights weights;
  int64_t batch_size = 64;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int64_t iterations = 10000;
  int64_t epochs = 0;  // > 0: run epochs * batches-per-epoch instead of iterations
  uint64_t seed = 1;
  int64_t checkpoint_every = 0;  // 0 = final checkpoint only
  bool compactness_enabled = true;
  bool pixel_restoration = false;  // ablation: restore x_t to x_r by pixel loss
  bool augment_zoom = false;
  std::string run_dir = "run";

  void validate() const;
};

// Everything a training run needs to continue bit-exactly: weights,
// spectral-norm power-iteration state, optimizer moments, step counts,
// and the data/transform rng stream.
struct CheckpointData {
  int64_t iteration = 0;
  int64_t steps_g = 0;
  int64_t steps_d = 0;
  std::string rng_state;
  TrainConfig cfg;
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::string& dir, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& dir);

// Rejects a checkpoint whose architecture or protocol does not match
// the requested configuration.
void require_compatible(const TrainConfig& stored, const TrainConfig& requested);

// Raw tensor blob I/O (sorted-by-name, little-endian doubles).
void write_tensor_blob(const std::string& path, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> read_tensor_blob(const std::string& path);

}  // namespace dgad
