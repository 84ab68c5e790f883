#include "score/scoring.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

namespace dgad {

// ---------------------------------------------------------------------------
// reconstruction score
// ---------------------------------------------------------------------------

std::vector<double> reconstruction_scores(Encoder& en, Decoder& de, const Tensor& batch, double lambda_s) {
  if (batch.rank() != 4) fail("reconstruction_scores expects [N,C,H,W]");
  if (lambda_s < 0.0) fail("lambda_s must be non-negative");
  NoGrad ng;
  Var x = Var::leaf(batch, false);
  Var z = en.forward(x);
  Var x_hat = de.forward(z);
  Var z_hat = en.forward(x_hat);

  int64_t N = batch.dim(0);
  int64_t img_elems = batch.numel() / N;
  int64_t lat_elems = z.value().numel() / N;
  std::vector<double> out(static_cast<size_t>(N));
  for (int64_t n = 0; n < N; ++n) {
    const double* xp = batch.data() + n * img_elems;
    const double* rp = x_hat.value().data() + n * img_elems;
    double img_l1 = 0.0;
    for (int64_t i = 0; i < img_elems; ++i) img_l1 += std::fabs(xp[i] - rp[i]);
    const double* zp = z.value().data() + n * lat_elems;
    const double* zhp = z_hat.value().data() + n * lat_elems;
    double lat_l1 = 0.0;
    for (int64_t i = 0; i < lat_elems; ++i) lat_l1 += std::fabs(zp[i] - zhp[i]);
    out[static_cast<size_t>(n)] = img_l1 / static_cast<double>(img_elems) + lambda_s * lat_l1 / static_cast<double>(lat_elems);
  }
  return out;
}

std::vector<double> normalize_scores(const std::vector<double>& scores) {
  if (scores.empty()) fail("normalize_scores on empty vector");
  double lo = scores[0], hi = scores[0];
  for (double s : scores) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  std::vector<double> out(scores.size());
  if (hi == lo) {
    std::cerr << "warning: all scores equal (" << lo << "); normalization degenerate, returning 0.5\n";
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  double span = hi - lo;
  for (size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - lo) / span;
  return out;
}

// ---------------------------------------------------------------------------
// special functions
// ---------------------------------------------------------------------------

double digamma(double x) {
  if (!(x > 0.0)) fail("digamma domain: x must be > 0");
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  // Asymptotic series for large x; shifted to x >= 10 the truncation
  // error sits near 1e-12 relative.
  double inv = 1.0 / x, inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
  return result;
}

double trigamma(double x) {
  if (!(x > 0.0)) fail("trigamma domain: x must be > 0");
  double result = 0.0;
  while (x < 10.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  double inv = 1.0 / x, inv2 = inv * inv;
  result += inv * (1.0 + 0.5 * inv + inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0))));
  return result;
}

double inverse_digamma(double y) {
  // Minka's initialization, then Newton.
  double x = (y >= -2.22) ? std::exp(y) + 0.5 : -1.0 / (y + 0.5772156649015328606);
  for (int i = 0; i < 8; ++i) {
    double f = digamma(x) - y;
    x -= f / trigamma(x);
    if (x <= 0.0) x = 1e-10;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Dirichlet fit
// ---------------------------------------------------------------------------

std::vector<double> fit_dirichlet_ml(const Tensor& probs) {
  if (probs.rank() != 2) fail("fit_dirichlet_ml expects [n,K]");
  int64_t n = probs.dim(0), K = probs.dim(1);
  if (K < 2) fail("dirichlet fit needs at least 2 categories");
  if (n < K) fail("dirichlet fit needs at least as many samples as categories (" + std::to_string(n) + " < " + std::to_string(K) + ")");

  // Clip to the open simplex and renormalize so logs stay finite even
  // for saturated softmax outputs.
  constexpr double kClipLo = 1e-6, kClipHi = 1.0 - 1e-6;
  std::vector<double> mean_log(static_cast<size_t>(K), 0.0), mean_p(static_cast<size_t>(K), 0.0);
  double mean_p0_sq = 0.0;
  std::vector<double> row(static_cast<size_t>(K));
  for (int64_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int64_t k = 0; k < K; ++k) {
      row[static_cast<size_t>(k)] = std::clamp(probs[i * K + k], kClipLo, kClipHi);
      sum += row[static_cast<size_t>(k)];
    }
    for (int64_t k = 0; k < K; ++k) {
      double p = row[static_cast<size_t>(k)] / sum;
      mean_log[static_cast<size_t>(k)] += std::log(p);
      mean_p[static_cast<size_t>(k)] += p;
    }
    mean_p0_sq += (row[0] / sum) * (row[0] / sum);
  }
  for (int64_t k = 0; k < K; ++k) {
    mean_log[static_cast<size_t>(k)] /= static_cast<double>(n);
    mean_p[static_cast<size_t>(k)] /= static_cast<double>(n);
  }
  mean_p0_sq /= static_cast<double>(n);

  // Moment-matched initial scale (Minka eq. for alpha_0 from the first
  // component), with a flat fallback when variance degenerates.
  std::vector<double> alpha(static_cast<size_t>(K));
  double denom = mean_p0_sq - mean_p[0] * mean_p[0];
  double s = (denom > 1e-12) ? (mean_p[0] - mean_p0_sq) / denom : static_cast<double>(K);
  if (!std::isfinite(s) || s <= 0.0) s = static_cast<double>(K);
  for (int64_t k = 0; k < K; ++k) alpha[static_cast<size_t>(k)] = std::max(1e-8, s * mean_p[static_cast<size_t>(k)]);

  // Minka fixed point: alpha_k <- invpsi(psi(sum alpha) + <log p_k>).
  for (int iter = 0; iter < 1000; ++iter) {
    double a0 = 0.0;
    for (double a : alpha) a0 += a;
    double psi_a0 = digamma(a0);
    double max_rel = 0.0;
    for (int64_t k = 0; k < K; ++k) {
      double next = inverse_digamma(psi_a0 + mean_log[static_cast<size_t>(k)]);
      max_rel = std::max(max_rel, std::fabs(next - alpha[static_cast<size_t>(k)]) / std::max(std::fabs(alpha[static_cast<size_t>(k)]), 1e-12));
      alpha[static_cast<size_t>(k)] = next;
    }
    if (max_rel < 1e-6) break;
  }
  for (double a : alpha) {
    if (!std::isfinite(a) || a <= 0.0) fail("dirichlet fit produced a non-positive concentration");
  }
  return alpha;
}

std::vector<int64_t> scoring_transforms(const Protocol& protocol, bool subsample, uint64_t seed, int64_t extra) {
  int64_t total = protocol.num_transforms();
  if (protocol.kind != ProtocolKind::kJigsawRotation || !subsample) {
    std::vector<int64_t> all(static_cast<size_t>(total));
    for (int64_t i = 0; i < total; ++i) all[static_cast<size_t>(i)] = i;
    return all;
  }
  // All 6 zero-rotation permutations, then seeded distinct rotated picks.
  std::set<int64_t> chosen;
  for (int64_t p = 0; p < 6; ++p) chosen.insert(p * 64);
  RngStream rng(seed);
  while (static_cast<int64_t>(chosen.size()) < 6 + extra) chosen.insert(rng.uniform_int(0, total - 1));
  return std::vector<int64_t>(chosen.begin(), chosen.end());
}

DirichletParams fit_dirichlet(const std::vector<Tensor>& softmaxes, const Protocol& protocol, const std::vector<int64_t>& transform_indices) {
  if (softmaxes.size() != transform_indices.size()) fail("fit_dirichlet: one softmax matrix per transform required");
  DirichletParams params;
  params.protocol_id = static_cast<int>(protocol.kind);
  params.transform_indices = transform_indices;
  std::vector<int64_t> blocks = protocol.label_blocks();
  for (const Tensor& mat : softmaxes) {
    if (mat.rank() != 2 || mat.dim(1) != protocol.label_dim()) fail("fit_dirichlet: softmax matrix width mismatch");
    int64_t n = mat.dim(0);
    std::vector<double> alpha;
    alpha.reserve(static_cast<size_t>(protocol.label_dim()));
    int64_t off = 0;
    for (int64_t b : blocks) {
      Tensor sub({n, b});
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t k = 0; k < b; ++k) sub[i * b + k] = mat[i * protocol.label_dim() + off + k];
      }
      std::vector<double> ab = fit_dirichlet_ml(sub);
      alpha.insert(alpha.end(), ab.begin(), ab.end());
      off += b;
    }
    params.alpha.push_back(std::move(alpha));
  }
  return params;
}

// ---------------------------------------------------------------------------
// applying the nets
// ---------------------------------------------------------------------------

namespace {

// Softmax of D_cls over a transformed batch.
Tensor transform_softmax(Encoder& en, Discriminator& disc, const Tensor& batch, const Protocol& protocol, int64_t tindex) {
  Tensor xt = apply_transform_batch(batch, protocol.transform_by_index(tindex), protocol.kind);
  Var x = Var::leaf(std::move(xt), false);
  Var z = en.forward(x);
  DiscOut d = disc.forward(x, z);
  return softmax_blocks(d.cls.value(), protocol.label_blocks());
}

}  // namespace

std::vector<Tensor> collect_transform_softmaxes(Encoder& en, Discriminator& disc, const std::vector<Sample>& samples,
                                                const Protocol& protocol, const std::vector<int64_t>& transform_indices,
                                                int64_t batch_size) {
  if (samples.empty()) fail("collect_transform_softmaxes: no samples");
  if (batch_size < 1) fail("batch_size must be >= 1");
  NoGrad ng;
  int64_t n = static_cast<int64_t>(samples.size()), L = protocol.label_dim();
  std::vector<Tensor> out;
  out.reserve(transform_indices.size());
  for (size_t t = 0; t < transform_indices.size(); ++t) out.emplace_back(std::vector<int64_t>{n, L});
  for (int64_t start = 0; start < n; start += batch_size) {
    int64_t count = std::min(batch_size, n - start);
    std::vector<int64_t> idx(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) idx[static_cast<size_t>(i)] = start + i;
    Tensor batch = stack_batch(samples, idx);
    for (size_t t = 0; t < transform_indices.size(); ++t) {
      Tensor sm = transform_softmax(en, disc, batch, protocol, transform_indices[t]);
      std::copy(sm.data(), sm.data() + sm.numel(), out[t].data() + start * L);
    }
  }
  return out;
}

std::vector<double> dirichlet_scores(Encoder& en, Discriminator& disc, const Tensor& batch, const Protocol& protocol,
                                     const DirichletParams& params) {
  if (params.protocol_id != static_cast<int>(protocol.kind)) {
    fail("dirichlet params were fitted for protocol " + std::to_string(params.protocol_id) + ", not " +
         std::to_string(static_cast<int>(protocol.kind)));
  }
  if (params.alpha.size() != params.transform_indices.size() || params.alpha.empty()) fail("dirichlet params are incomplete");
  for (const auto& a : params.alpha) {
    if (static_cast<int64_t>(a.size()) != protocol.label_dim()) fail("dirichlet params label width mismatch");
  }
  NoGrad ng;
  int64_t N = batch.dim(0), L = protocol.label_dim();
  std::vector<double> scores(static_cast<size_t>(N), 0.0);
  std::vector<int64_t> blocks = protocol.label_blocks();
  for (size_t t = 0; t < params.transform_indices.size(); ++t) {
    Tensor xt = apply_transform_batch(batch, protocol.transform_by_index(params.transform_indices[t]), protocol.kind);
    Var x = Var::leaf(std::move(xt), false);
    Var z = en.forward(x);
    DiscOut d = disc.forward(x, z);
    Tensor logp = log_softmax_blocks(d.cls.value(), blocks);
    const std::vector<double>& alpha = params.alpha[t];
    for (int64_t i = 0; i < N; ++i) {
      double s = 0.0;
      for (int64_t k = 0; k < L; ++k) s += (alpha[static_cast<size_t>(k)] - 1.0) * logp[i * L + k];
      scores[static_cast<size_t>(i)] += s;
    }
  }
  return scores;
}

}  // namespace dgad
