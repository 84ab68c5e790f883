#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.h"
#include "score/scoring.h"

using namespace dgad;
using testutil::random_tensor;
using testutil::tiny_net_config;

namespace {

// Marsaglia-Tsang gamma sampler (independent of library code) used to
// draw Dirichlet vectors with known concentration.
double sample_gamma(double alpha, RngStream& rng) {
  if (alpha < 1.0) {
    double u = rng.uniform();
    return sample_gamma(alpha + 1.0, rng) * std::pow(u, 1.0 / alpha);
  }
  double d = alpha - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

Tensor sample_dirichlet(const std::vector<double>& alpha, int64_t n, RngStream& rng) {
  int64_t k = static_cast<int64_t>(alpha.size());
  Tensor out({n, k});
  for (int64_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int64_t j = 0; j < k; ++j) {
      double g = sample_gamma(alpha[static_cast<size_t>(j)], rng);
      out[i * k + j] = g;
      sum += g;
    }
    for (int64_t j = 0; j < k; ++j) out[i * k + j] /= sum;
  }
  return out;
}

}  // namespace

TEST_CASE("digamma agrees with closed forms and the recurrence") {
  constexpr double gamma_e = 0.5772156649015329;
  CHECK(digamma(1.0) == doctest::Approx(-gamma_e).epsilon(1e-10));
  CHECK(digamma(0.5) == doctest::Approx(-gamma_e - 2.0 * std::log(2.0)).epsilon(1e-10));
  CHECK(digamma(2.0) == doctest::Approx(1.0 - gamma_e).epsilon(1e-10));
  RngStream rng(81);
  for (int i = 0; i < 50; ++i) {
    double x = rng.uniform(0.05, 20.0);
    CHECK(digamma(x + 1.0) == doctest::Approx(digamma(x) + 1.0 / x).epsilon(1e-9));
  }
}

TEST_CASE("trigamma agrees with closed forms and the recurrence") {
  constexpr double pi = 3.141592653589793;
  CHECK(trigamma(1.0) == doctest::Approx(pi * pi / 6.0).epsilon(1e-9));
  CHECK(trigamma(0.5) == doctest::Approx(pi * pi / 2.0).epsilon(1e-9));
  RngStream rng(82);
  for (int i = 0; i < 50; ++i) {
    double x = rng.uniform(0.05, 20.0);
    CHECK(trigamma(x + 1.0) == doctest::Approx(trigamma(x) - 1.0 / (x * x)).epsilon(1e-8));
  }
}

TEST_CASE("inverse_digamma inverts digamma over the working range") {
  RngStream rng(83);
  for (int i = 0; i < 60; ++i) {
    double x = rng.uniform(0.01, 50.0);
    CHECK(inverse_digamma(digamma(x)) == doctest::Approx(x).epsilon(1e-6));
  }
}

TEST_CASE("dirichlet fit recovers known concentrations from samples") {
  RngStream rng(84);
  std::vector<double> alpha{2.0, 5.0, 1.0};
  Tensor probs = sample_dirichlet(alpha, 20000, rng);
  std::vector<double> fit = fit_dirichlet_ml(probs);
  REQUIRE(fit.size() == 3);
  for (size_t i = 0; i < 3; ++i) CHECK(fit[i] == doctest::Approx(alpha[i]).epsilon(0.06));

  // a sharper, asymmetric case
  std::vector<double> alpha2{12.0, 3.0};
  Tensor probs2 = sample_dirichlet(alpha2, 20000, rng);
  std::vector<double> fit2 = fit_dirichlet_ml(probs2);
  for (size_t i = 0; i < 2; ++i) CHECK(fit2[i] == doctest::Approx(alpha2[i]).epsilon(0.08));
}

TEST_CASE("dirichlet fit handles boundary probabilities by clipping") {
  // one-hot rows would have log 0 without clipping
  Tensor probs({6, 3}, 0.0);
  for (int64_t i = 0; i < 6; ++i) probs[i * 3 + (i % 3)] = 1.0;
  std::vector<double> fit = fit_dirichlet_ml(probs);
  REQUIRE(fit.size() == 3);
  for (double a : fit) {
    CHECK(std::isfinite(a));
    CHECK(a > 0.0);
    CHECK(a < 1.0);  // extreme spread -> concentration far below uniform
  }
}

TEST_CASE("dirichlet fit needs more rows than dimensions") {
  Tensor probs({2, 3}, 1.0 / 3.0);
  CHECK_THROWS_AS((void)fit_dirichlet_ml(probs), Error);
}

TEST_CASE("normalize_scores maps to [0,1] preserving order") {
  std::vector<double> s{3.0, -1.0, 7.0, 3.0};
  std::vector<double> n = normalize_scores(s);
  CHECK(n[1] == doctest::Approx(0.0));
  CHECK(n[2] == doctest::Approx(1.0));
  CHECK(n[0] == doctest::Approx(0.5));
  CHECK(n[0] == n[3]);
  // affine invariance: same result after y = 3x + 4
  std::vector<double> t{3.0 * 3 + 4, -1.0 * 3 + 4, 7.0 * 3 + 4, 3.0 * 3 + 4};
  std::vector<double> nt = normalize_scores(t);
  for (size_t i = 0; i < n.size(); ++i) CHECK(nt[i] == doctest::Approx(n[i]));
}

TEST_CASE("normalize_scores collapses constant vectors to one half") {
  std::vector<double> n = normalize_scores({4.2, 4.2, 4.2});
  for (double v : n) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("scoring transform sets per protocol") {
  Protocol p1 = Protocol::from_int(1);
  Protocol p2 = Protocol::from_int(2);
  Protocol p3 = Protocol::from_int(3);
  CHECK(scoring_transforms(p1, true, 1) == std::vector<int64_t>({0, 1, 2, 3}));
  CHECK(scoring_transforms(p2, true, 1) == std::vector<int64_t>({0, 1, 2, 3, 4, 5}));
  std::vector<int64_t> full = scoring_transforms(p3, false, 1);
  CHECK(full.size() == 384);
  std::vector<int64_t> sub = scoring_transforms(p3, true, 9);
  CHECK(sub.size() == 24);
  std::set<int64_t> uniq(sub.begin(), sub.end());
  CHECK(uniq.size() == 24);  // all distinct
  // the six pure permutations are always included
  for (int64_t p = 0; p < 6; ++p) CHECK(uniq.count(p * 64) == 1);
  // deterministic in the seed
  CHECK(scoring_transforms(p3, true, 9) == sub);
  CHECK(scoring_transforms(p3, true, 10) != sub);
}

TEST_CASE("reconstruction scores equal a manual forward pass") {
  NetConfig cfg = tiny_net_config();
  RngStream rng(85);
  Encoder en(cfg, rng);
  Decoder de(cfg, rng);
  RngStream drng(86);
  Tensor batch = random_tensor({3, 1, 8, 8}, drng, 0.5);
  std::vector<double> got = reconstruction_scores(en, de, batch, 10.0);
  REQUIRE(got.size() == 3);

  NoGrad guard;
  Tensor z = en.forward(Var::leaf(batch)).value();
  Tensor xh = de.forward(Var::leaf(z)).value();
  Tensor zh = en.forward(Var::leaf(xh)).value();
  int64_t px = batch.numel() / 3, lz = z.numel() / 3;
  for (int64_t n = 0; n < 3; ++n) {
    double dx = 0.0, dz = 0.0;
    for (int64_t i = 0; i < px; ++i) dx += std::fabs(batch[n * px + i] - xh[n * px + i]);
    for (int64_t i = 0; i < lz; ++i) dz += std::fabs(z[n * lz + i] - zh[n * lz + i]);
    double want = dx / static_cast<double>(px) + 10.0 * dz / static_cast<double>(lz);
    CHECK(got[static_cast<size_t>(n)] == doctest::Approx(want).epsilon(1e-12));
  }
  // identical inputs score identically
  Tensor twice({2, 1, 8, 8});
  for (int64_t i = 0; i < 64; ++i) twice[i] = twice[64 + i] = batch[i];
  std::vector<double> same = reconstruction_scores(en, de, twice, 10.0);
  CHECK(same[0] == doctest::Approx(same[1]).epsilon(1e-12));
}

TEST_CASE("dirichlet scores equal the explicit log-likelihood sum") {
  NetConfig cfg = tiny_net_config(4);
  RngStream rng(87);
  Encoder en(cfg, rng);
  Decoder de(cfg, rng);
  Discriminator disc(cfg, rng);
  Protocol p1 = Protocol::from_int(1);

  DirichletParams params;
  params.protocol_id = 1;
  params.transform_indices = {0, 1, 2, 3};
  RngStream arng(88);
  for (int t = 0; t < 4; ++t) {
    std::vector<double> a;
    for (int k = 0; k < 4; ++k) a.push_back(arng.uniform(0.5, 3.0));
    params.alpha.push_back(a);
  }

  RngStream drng(89);
  Tensor batch = random_tensor({2, 1, 8, 8}, drng, 0.5);
  std::vector<double> got = dirichlet_scores(en, disc, batch, p1, params);
  REQUIRE(got.size() == 2);

  NoGrad guard;
  std::vector<double> want(2, 0.0);
  for (size_t ti = 0; ti < 4; ++ti) {
    TransformSpec spec = p1.transform_by_index(params.transform_indices[ti]);
    Tensor xt = apply_transform_batch(batch, spec, p1.kind);
    Var z = en.forward(Var::leaf(xt));
    DiscOut out = disc.forward(Var::leaf(xt), z);
    Tensor lp = log_softmax_blocks(out.cls.value(), p1.label_blocks());
    for (int64_t n = 0; n < 2; ++n)
      for (int64_t k = 0; k < 4; ++k) want[static_cast<size_t>(n)] += (params.alpha[ti][static_cast<size_t>(k)] - 1.0) * lp[n * 4 + k];
  }
  for (int64_t n = 0; n < 2; ++n) CHECK(got[static_cast<size_t>(n)] == doctest::Approx(want[static_cast<size_t>(n)]).epsilon(1e-9));
}

TEST_CASE("softmax collection yields simplex rows per transform") {
  NetConfig cfg = tiny_net_config(6);
  RngStream rng(90);
  Encoder en(cfg, rng);
  Discriminator disc(cfg, rng);
  Protocol p2 = Protocol::from_int(2);
  auto samples = synthetic_shapes(5, 8, 0, 91);
  std::vector<int64_t> idx = scoring_transforms(p2, true, 1);
  std::vector<Tensor> soft = collect_transform_softmaxes(en, disc, samples, p2, idx, 2);
  REQUIRE(soft.size() == idx.size());
  for (const Tensor& m : soft) {
    REQUIRE(m.shape() == std::vector<int64_t>({5, 6}));
    for (int64_t n = 0; n < 5; ++n) {
      double s = 0.0;
      for (int64_t k = 0; k < 6; ++k) {
        CHECK(m[n * 6 + k] >= 0.0);
        s += m[n * 6 + k];
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("multi-hot protocols fit each label block separately") {
  RngStream rng(92);
  Protocol p3 = Protocol::from_int(3);
  // synthetic softmax tables for two transforms
  std::vector<int64_t> idx{0, 70};
  std::vector<Tensor> soft;
  for (size_t t = 0; t < idx.size(); ++t) {
    Tensor m({40, 18});
    std::vector<std::vector<double>> alphas{{2, 1, 1, 1, 1, 1}, {3, 1, 1, 2}, {1, 4, 1, 1}, {1, 1, 1, 5}};
    int64_t off = 0;
    for (const auto& a : alphas) {
      Tensor block = sample_dirichlet(a, 40, rng);
      int64_t k = static_cast<int64_t>(a.size());
      for (int64_t n = 0; n < 40; ++n)
        for (int64_t j = 0; j < k; ++j) m[n * 18 + off + j] = block[n * k + j];
      off += k;
    }
    soft.push_back(m);
  }
  DirichletParams params = fit_dirichlet(soft, p3, idx);
  CHECK(params.protocol_id == 3);
  REQUIRE(params.alpha.size() == 2);
  REQUIRE(params.alpha[0].size() == 18);
  // blockwise fit equals fitting the extracted block alone
  for (size_t t = 0; t < idx.size(); ++t) {
    int64_t off = 0;
    for (int64_t k : p3.label_blocks()) {
      Tensor block({40, k});
      for (int64_t n = 0; n < 40; ++n)
        for (int64_t j = 0; j < k; ++j) block[n * k + j] = soft[t][n * 18 + off + j];
      std::vector<double> solo = fit_dirichlet_ml(block);
      for (int64_t j = 0; j < k; ++j)
        CHECK(params.alpha[t][static_cast<size_t>(off + j)] == doctest::Approx(solo[static_cast<size_t>(j)]).epsilon(1e-12));
      off += k;
    }
  }
}

TEST_CASE("dirichlet scoring rejects mismatched parameters") {
  NetConfig cfg = tiny_net_config(4);
  RngStream rng(93);
  Encoder en(cfg, rng);
  Discriminator disc(cfg, rng);
  Protocol p1 = Protocol::from_int(1);
  RngStream drng(94);
  Tensor batch = random_tensor({1, 1, 8, 8}, drng, 0.5);
  DirichletParams params;
  params.protocol_id = 2;  // protocol mismatch
  params.transform_indices = {0};
  params.alpha = {{1, 1, 1, 1}};
  CHECK_THROWS_AS((void)dirichlet_scores(en, disc, batch, p1, params), Error);
  DirichletParams bad_width;
  bad_width.protocol_id = 1;
  bad_width.transform_indices = {0};
  bad_width.alpha = {{1, 1}};  // wrong alpha width
  CHECK_THROWS_AS((void)dirichlet_scores(en, disc, batch, p1, bad_width), Error);
}
