#include "losses/losses.h"

namespace dgad {

void LossWeights::validate() const {
  if (cls < 0.0 || rec < 0.0 || cmp < 0.0) fail("loss weights must be non-negative");
}

Var reconstruction_loss(const Var& x, const Var& x_hat) { return l1_mean(x, x_hat); }

Var classification_loss(const Var& logits, const Tensor& target_bits, const std::vector<int64_t>& blocks) {
  return softmax_cross_entropy_blocks(logits, target_bits, blocks);
}

Var compactness_loss(const Var& z, CompactnessPool pool) { return compactness(z, pool); }

Var adversarial_loss_d(const Var& adv_real, const Var& adv_fake) {
  // mean(relu(1 - real)) + mean(relu(1 + fake))
  Var real_term = mean_all(relu(affine(adv_real, -1.0, 1.0)));
  Var fake_term = mean_all(relu(affine(adv_fake, 1.0, 1.0)));
  return add(real_term, fake_term);
}

Var adversarial_loss_g(const Var& adv_fake) { return scale(mean_all(adv_fake), -1.0); }

LossTotals total_losses(const LossParts& parts, const LossWeights& w) {
  w.validate();
  LossTotals t;
  t.total_d = parts.adv_d + w.cls * parts.cls_d;
  t.total_g = parts.adv_g + w.cls * parts.cls_g + w.rec * parts.rec + w.cmp * parts.cmp;
  return t;
}

}  // namespace dgad
