#pragma once

#include <memory>
#include <string>
#include <vector>

#include "data/dataset.h"
#include "nn/adam.h"
#include "nn/networks.h"
#include "pretext/pretext.h"
#include "train/checkpoint.h"

namespace dgad {

struct LossReport {
  int64_t iteration = 0;
  double rec = 0.0, cls_d = 0.0, cls_g = 0.0, cmp = 0.0;
  double adv_d = 0.0, adv_g = 0.0, total_d = 0.0, total_g = 0.0;
};

// Deterministic epoch permutation: each epoch reshuffles with its own
// seeded stream so a resumed run can recompute the in-flight epoch.
std::vector<int64_t> epoch_permutation(uint64_t seed, int64_t epoch, int64_t n);

// Splits a permutation into ceil(n/batch) batches covering every index
// once.  A trailing singleton is rebalanced with its neighbor so every
// batch keeps >= 2 images (batch variance stays defined).
std::vector<std::vector<int64_t>> epoch_batches(const std::vector<int64_t>& perm, int64_t batch_size);

// Alternating adversarial trainer: per batch, one discriminator update
// on detached generator outputs, then one encoder/decoder update against
// the frozen discriminator.  Transforms are sampled once per step and
// shared by both phases.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);
  static std::unique_ptr<Trainer> load(const std::string& ckpt_dir);

  // One D update + one G update on the batch; specs has one transform
  // per image.  The overload without specs samples them from the
  // trainer's stream.
  LossReport train_step(const Tensor& batch, const std::vector<TransformSpec>& specs);
  LossReport train_step(const Tensor& batch);

  // Full loop over shuffled batches; writes metrics.csv and periodic
  // checkpoints under cfg.run_dir; returns the final checkpoint path.
  std::string train(const Dataset& data);

  void save(const std::string& dir) const;
  int64_t total_iterations(int64_t dataset_size) const;

  TrainConfig cfg;
  Protocol protocol;
  std::unique_ptr<Encoder> en;
  std::unique_ptr<Decoder> de;
  std::unique_ptr<Discriminator> disc;
  Adam opt_g, opt_d;
  RngStream rng;  // transform sampling + augmentation draws
  int64_t iteration = 0;

 private:
  CheckpointData snapshot() const;
  void restore(const CheckpointData& data);
};

}  // namespace dgad
