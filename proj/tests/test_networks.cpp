#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.h"
#include "nn/networks.h"

using namespace dgad;
using testutil::random_tensor;
using testutil::tiny_net_config;

TEST_CASE("encoder, decoder and discriminator shapes line up") {
  NetConfig cfg = tiny_net_config(6);
  RngStream rng(41);
  Encoder en(cfg, rng);
  Decoder de(cfg, rng);
  Discriminator disc(cfg, rng);

  RngStream drng(42);
  Tensor x = random_tensor({3, cfg.image_channels, cfg.image_size, cfg.image_size}, drng, 0.5);
  NoGrad guard;
  Var z = en.forward(Var::leaf(x));
  CHECK(z.value().shape() == std::vector<int64_t>({3, cfg.latent_channels, cfg.image_size / 4, cfg.image_size / 4}));
  Var xr = de.forward(z);
  CHECK(xr.value().shape() == x.shape());
  DiscOut out = disc.forward(Var::leaf(x), z);
  CHECK(out.adv.value().shape() == std::vector<int64_t>({3, 1}));
  CHECK(out.cls.value().shape() == std::vector<int64_t>({3, 6}));
}

TEST_CASE("encoder and decoder outputs live in (-1,1)") {
  NetConfig cfg = tiny_net_config();
  RngStream rng(43);
  Encoder en(cfg, rng);
  Decoder de(cfg, rng);
  RngStream drng(44);
  Tensor x = random_tensor({2, 1, 8, 8}, drng, 2.0);
  NoGrad guard;
  Var z = en.forward(Var::leaf(x));
  Var xr = de.forward(z);
  for (int64_t i = 0; i < z.value().numel(); ++i) {
    CHECK(z.value()[i] > -1.0);
    CHECK(z.value()[i] < 1.0);
  }
  for (int64_t i = 0; i < xr.value().numel(); ++i) {
    CHECK(xr.value()[i] > -1.0);
    CHECK(xr.value()[i] < 1.0);
  }
}

TEST_CASE("same seed builds identical networks, different seeds differ") {
  NetConfig cfg = tiny_net_config();
  RngStream a(7), b(7), c(8);
  Encoder e1(cfg, a), e2(cfg, b), e3(cfg, c);
  ParamMap p1 = e1.params(), p2 = e2.params(), p3 = e3.params();
  REQUIRE(p1.size() == p2.size());
  bool all_equal = true, any_diff_seed = false;
  for (size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].name == p2[i].name);
    const Tensor& t1 = p1[i].var.value();
    const Tensor& t2 = p2[i].var.value();
    REQUIRE(t1.same_shape(t2));
    for (int64_t j = 0; j < t1.numel(); ++j)
      if (t1[j] != t2[j]) all_equal = false;
    const Tensor& t3 = p3[i].var.value();
    for (int64_t j = 0; j < t1.numel(); ++j)
      if (t1[j] != t3[j]) any_diff_seed = true;
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);
}

TEST_CASE("parameter names carry the network prefix and are unique") {
  NetConfig cfg = tiny_net_config();
  RngStream rng(45);
  Encoder en(cfg, rng);
  Decoder de(cfg, rng);
  Discriminator disc(cfg, rng);
  std::set<std::string> names;
  for (const auto& e : en.params()) {
    CHECK(e.name.rfind("en.", 0) == 0);
    CHECK(names.insert(e.name).second);
  }
  for (const auto& e : de.params()) {
    CHECK(e.name.rfind("de.", 0) == 0);
    CHECK(names.insert(e.name).second);
  }
  for (const auto& e : disc.params()) {
    CHECK(e.name.rfind("d.", 0) == 0);
    CHECK(names.insert(e.name).second);
  }
  // discriminator exposes power-iteration state as named buffers
  BufferMap bufs = disc.buffers();
  CHECK(!bufs.empty());
  for (const auto& b : bufs) CHECK(b.name.rfind("d.", 0) == 0);
}

TEST_CASE("default-size networks hit the parameter budget") {
  NetConfig cfg;  // 32x32 rgb, width 64, latent 128
  RngStream rng(46);
  Encoder en(cfg, rng);
  Decoder de(cfg, rng);
  Discriminator disc(cfg, rng);
  int64_t gen = en.param_count() + de.param_count();
  int64_t d = disc.param_count();
  CHECK(gen >= static_cast<int64_t>(8.9e6 * 0.9));
  CHECK(gen <= static_cast<int64_t>(8.9e6 * 1.1));
  CHECK(d >= static_cast<int64_t>(3.5e6 * 0.9));
  CHECK(d <= static_cast<int64_t>(3.5e6 * 1.1));
}

TEST_CASE("discriminator weights are spectrally normalized") {
  NetConfig cfg = tiny_net_config();
  RngStream rng(47);
  Discriminator disc(cfg, rng);
  RngStream drng(48);
  Tensor x = random_tensor({2, 1, 8, 8}, drng, 0.5);
  Tensor z = random_tensor({2, cfg.latent_channels, 2, 2}, drng, 0.5);
  // settle the power iteration with taped forwards (inference does not
  // advance the estimate)
  for (int i = 0; i < 120; ++i) (void)disc.forward(Var::leaf(x), Var::leaf(z));
  CHECK(disc.max_sigma() > 0.0);

  // every sigma estimate matches an independent Jacobi SVD oracle
  CHECK(disc.conv_x1.spectral);
  auto check_sigma = [](double est, const Tensor& w) {
    double oracle = testutil::top_singular_value(w, w.dim(0));
    CHECK(est == doctest::Approx(oracle).epsilon(0.02));
  };
  check_sigma(disc.conv_x1.sigma_estimate(), disc.conv_x1.w.value());
  check_sigma(disc.joint1.sigma_estimate(), disc.joint1.w.value());
  check_sigma(disc.head_adv.sigma_estimate(), disc.head_adv.w.value());
  check_sigma(disc.head_cls.sigma_estimate(), disc.head_cls.w.value());
}

TEST_CASE("inference forwards do not advance spectral-norm state") {
  NetConfig cfg = tiny_net_config();
  RngStream rng(49);
  Discriminator disc(cfg, rng);
  RngStream drng(50);
  Tensor x = random_tensor({2, 1, 8, 8}, drng, 0.5);
  Tensor z = random_tensor({2, cfg.latent_channels, 2, 2}, drng, 0.5);
  Tensor u_before = disc.conv_x1.u;
  NoGrad guard;
  DiscOut a = disc.forward(Var::leaf(x), Var::leaf(z));
  DiscOut b = disc.forward(Var::leaf(x), Var::leaf(z));
  for (int64_t i = 0; i < u_before.numel(); ++i) CHECK(disc.conv_x1.u[i] == u_before[i]);
  for (int64_t i = 0; i < a.adv.value().numel(); ++i) CHECK(a.adv.value()[i] == b.adv.value()[i]);
  for (int64_t i = 0; i < a.cls.value().numel(); ++i) CHECK(a.cls.value()[i] == b.cls.value()[i]);
}

TEST_CASE("coordinate channels change shapes only where enabled") {
  NetConfig plain = tiny_net_config();
  NetConfig coord = tiny_net_config();
  coord.use_coord = true;
  RngStream r1(51), r2(51);
  Encoder e_plain(plain, r1);
  Encoder e_coord(coord, r2);
  // coord convs take two extra input channels on every conv
  CHECK(e_coord.param_count() > e_plain.param_count());
  RngStream drng(52);
  Tensor x = random_tensor({1, 1, 8, 8}, drng, 0.5);
  NoGrad guard;
  CHECK(e_coord.forward(Var::leaf(x)).value().shape() == e_plain.forward(Var::leaf(x)).value().shape());
}

TEST_CASE("zero padding and symmetric padding produce different features") {
  NetConfig sym = tiny_net_config();
  NetConfig zero = tiny_net_config();
  zero.padding = PadMode::kZero;
  RngStream r1(53), r2(53);
  Encoder e_sym(sym, r1);
  Encoder e_zero(zero, r2);
  RngStream drng(54);
  Tensor x = random_tensor({1, 1, 8, 8}, drng, 0.5);
  NoGrad guard;
  Tensor a = e_sym.forward(Var::leaf(x)).value();
  Tensor b = e_zero.forward(Var::leaf(x)).value();
  REQUIRE(a.same_shape(b));
  double diff = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) diff += std::fabs(a[i] - b[i]);
  CHECK(diff > 1e-6);
}

TEST_CASE("config validation rejects malformed setups") {
  NetConfig cfg = tiny_net_config();
  cfg.image_size = 10;  // not divisible by 4
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_net_config();
  cfg.image_channels = 2;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_net_config();
  cfg.label_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_net_config();
  cfg.base_width = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
