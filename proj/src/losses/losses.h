#pragma once

#include "core/ops.h"

namespace dgad {

struct LossWeights {
  double cls = 10.0;
  double rec = 20.0;
  double cmp = 100.0;

  void validate() const;
};

// Mean absolute error between an image batch and its restoration; the
// generator objective only restores untransformed inputs.
Var reconstruction_loss(const Var& x, const Var& x_hat);

// Blockwise softmax cross-entropy against multi-hot transform labels.
Var classification_loss(const Var& logits, const Tensor& target_bits, const std::vector<int64_t>& blocks);

// sqrt of batch variance of pooled encodings; pulls normal-sample
// encodings toward a common center.
Var compactness_loss(const Var& z, CompactnessPool pool = CompactnessPool::kChannelMean);

// Hinge critic losses; real pairs pushed above +1, fakes below -1.
Var adversarial_loss_d(const Var& adv_real, const Var& adv_fake);
// Generator side: raise the critic score of fakes.
Var adversarial_loss_g(const Var& adv_fake);

struct LossParts {
  double rec = 0.0, cls_d = 0.0, cls_g = 0.0, cmp = 0.0, adv_d = 0.0, adv_g = 0.0;
};

struct LossTotals {
  double total_d = 0.0, total_g = 0.0;
};

// Weighted sums for reporting: D gets adv + cls, the generator adds the
// restoration and compactness terms.
LossTotals total_losses(const LossParts& parts, const LossWeights& w);

}  // namespace dgad
