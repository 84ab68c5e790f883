#include <doctest.h>

#include <cmath>

#include "helpers.h"
#include "losses/losses.h"

using namespace dgad;
using testutil::random_tensor;

TEST_CASE("reconstruction loss is the mean absolute error") {
  Tensor x({2, 1, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
  Tensor y({2, 1, 2, 2}, {1, 1, 1, 1, 5, 5, 5, 5});
  double want = (1 + 0 + 1 + 2 + 1 + 0 + 1 + 2) / 8.0;
  CHECK(reconstruction_loss(Var::leaf(x), Var::leaf(y)).value().item() == doctest::Approx(want));
  // zero at equality
  CHECK(reconstruction_loss(Var::leaf(x), Var::leaf(x)).value().item() == doctest::Approx(0.0));
}

TEST_CASE("classification loss on uniform logits equals log K") {
  Tensor logits({3, 4}, 0.0);
  Tensor targets({3, 4}, 0.0);
  targets[0] = 1;
  targets[4 + 1] = 1;
  targets[8 + 3] = 1;
  CHECK(classification_loss(Var::leaf(logits), targets, {4}).value().item() == doctest::Approx(std::log(4.0)));
}

TEST_CASE("classification loss drops toward zero on confident correct logits") {
  Tensor logits({1, 4}, {30.0, 0.0, 0.0, 0.0});
  Tensor targets({1, 4}, {1.0, 0.0, 0.0, 0.0});
  CHECK(classification_loss(Var::leaf(logits), targets, {4}).value().item() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("multi-hot classification sums the per-block cross-entropies") {
  // blocks {6,4,4,4}: uniform logits -> log6 + 3 log4
  Tensor logits({2, 18}, 0.0);
  Tensor targets({2, 18}, 0.0);
  targets[0] = 1;
  targets[6] = 1;
  targets[10] = 1;
  targets[14] = 1;
  targets[18 + 5] = 1;
  targets[18 + 9] = 1;
  targets[18 + 13] = 1;
  targets[18 + 17] = 1;
  double want = std::log(6.0) + 3.0 * std::log(4.0);
  CHECK(classification_loss(Var::leaf(logits), targets, {6, 4, 4, 4}).value().item() == doctest::Approx(want));
}

TEST_CASE("hinge discriminator loss at the documented operating points") {
  auto col = [](std::vector<double> v) {
    int64_t n = static_cast<int64_t>(v.size());
    return Var::leaf(Tensor({n, 1}, std::move(v)));
  };
  // well-separated: real above +1, fake below -1 -> zero loss
  CHECK(adversarial_loss_d(col({2.0, 1.5}), col({-2.0, -1.1})).value().item() == doctest::Approx(0.0));
  // both at zero margin -> relu(1-0) + relu(1+0) = 2
  CHECK(adversarial_loss_d(col({0.0}), col({0.0})).value().item() == doctest::Approx(2.0));
  // mixed: relu(1-(-1)) = 2 on real, relu(1+3)=4 on fake
  CHECK(adversarial_loss_d(col({-1.0}), col({3.0})).value().item() == doctest::Approx(6.0));
  // batch means, not sums
  CHECK(adversarial_loss_d(col({0.0, 2.0}), col({-2.0, 0.0})).value().item() == doctest::Approx(0.5 + 0.5));
  // generator side is the negated critic mean on fakes
  CHECK(adversarial_loss_g(col({3.0, -1.0})).value().item() == doctest::Approx(-1.0));
}

TEST_CASE("compactness loss equals hand-computed batch spread") {
  // Pooled per-channel means across a batch of two: variance of {0,2}
  // is 1 (population), sqrt -> 1.
  Tensor z({2, 1, 2, 2}, {0, 0, 0, 0, 2, 2, 2, 2});
  CHECK(compactness_loss(Var::leaf(z)).value().item() == doctest::Approx(1.0));
  // identical samples -> 0
  Tensor z2({3, 2, 1, 1}, {5, -3, 5, -3, 5, -3});
  CHECK(compactness_loss(Var::leaf(z2)).value().item() == doctest::Approx(0.0));
}

TEST_CASE("loss weights default to the training recipe and validate") {
  LossWeights w;
  CHECK(w.cls == 10.0);
  CHECK(w.rec == 20.0);
  CHECK(w.cmp == 100.0);
  w.validate();
  w.rec = -1.0;
  CHECK_THROWS_AS(w.validate(), Error);
}

TEST_CASE("total losses combine parts with the configured weights") {
  LossParts parts;
  parts.rec = 0.25;
  parts.cls_d = 1.5;
  parts.cls_g = 2.0;
  parts.cmp = 0.03;
  parts.adv_d = 1.9;
  parts.adv_g = -0.4;
  LossWeights w;
  LossTotals t = total_losses(parts, w);
  CHECK(t.total_d == doctest::Approx(1.9 + 10.0 * 1.5));
  CHECK(t.total_g == doctest::Approx(-0.4 + 10.0 * 2.0 + 20.0 * 0.25 + 100.0 * 0.03));
}

TEST_CASE("gradcheck: every loss against central differences") {
  RngStream rng(61);

  Var x = Var::leaf(random_tensor({2, 1, 4, 4}, rng), true);
  Var y = Var::leaf(random_tensor({2, 1, 4, 4}, rng), true);
  auto frec = [&]() { return reconstruction_loss(x, y); };
  CHECK(testutil::gradcheck(x, frec, rng) < 1e-4);
  CHECK(testutil::gradcheck(y, frec, rng) < 1e-4);

  Var logits = Var::leaf(random_tensor({3, 6}, rng), true);
  Tensor targets({3, 6}, 0.0);
  targets[2] = 1;
  targets[6 + 0] = 1;
  targets[12 + 5] = 1;
  auto fcls = [&]() { return classification_loss(logits, targets, {6}); };
  CHECK(testutil::gradcheck(logits, fcls, rng) < 1e-4);

  Var z = Var::leaf(random_tensor({3, 2, 2, 2}, rng), true);
  auto fcmp = [&]() { return compactness_loss(z); };
  CHECK(testutil::gradcheck(z, fcmp, rng) < 1e-4);

  Var real = Var::leaf(random_tensor({4, 1}, rng), true);
  Var fake = Var::leaf(random_tensor({4, 1}, rng), true);
  auto fd = [&]() { return adversarial_loss_d(real, fake); };
  CHECK(testutil::gradcheck(real, fd, rng) < 1e-4);
  CHECK(testutil::gradcheck(fake, fd, rng) < 1e-4);
  auto fg = [&]() { return adversarial_loss_g(fake); };
  CHECK(testutil::gradcheck(fake, fg, rng) < 1e-4);
}
