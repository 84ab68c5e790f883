#pragma once

#include "data/dataset.h"
#include "nn/networks.h"
#include "pretext/pretext.h"

namespace dgad {

struct AnomalyScore {
  std::string sample_id;
  int label = 0;  // 0 = normal, 1 = anomalous
  double s_raw = 0.0;
  double s_norm = 0.0;
};

// Restoration anomaly score: per-sample mean|x - x_hat| plus
// lambda_s * mean|z - z_hat| with x_hat = De(En(x)), z_hat = En(x_hat).
// Mean reduction keeps the two terms scale-comparable across resolutions.
std::vector<double> reconstruction_scores(Encoder& en, Decoder& de, const Tensor& batch, double lambda_s = 10.0);

// Min-max to [0,1]; an all-equal vector maps to 0.5 with a warning.
std::vector<double> normalize_scores(const std::vector<double>& scores);

struct DirichletParams {
  int protocol_id = 1;
  std::vector<int64_t> transform_indices;   // scoring transform set
  std::vector<std::vector<double>> alpha;   // one concentration vector per transform
};

// Transform set used for the Dirichlet score.  Protocols 1-2 use all
// transforms.  Protocol 3 by default subsamples: the 6 permutations
// with zero rotations plus `extra` distinct seeded rotated variants
// (24 total); pass subsample=false to enumerate all 384.
std::vector<int64_t> scoring_transforms(const Protocol& protocol, bool subsample, uint64_t seed, int64_t extra = 18);

// Maximum-likelihood Dirichlet concentration from rows of `probs`
// ([n,K], each row on the simplex) by fixed-point iteration on clipped
// inputs; iterates to relative change < 1e-6 or 1000 rounds.
std::vector<double> fit_dirichlet_ml(const Tensor& probs);

// Fits one concentration vector per scoring transform from training
// softmax outputs (multi-hot protocols fit each label block separately
// and concatenate).  softmaxes[i] is [n, label_dim] for transform i.
DirichletParams fit_dirichlet(const std::vector<Tensor>& softmaxes, const Protocol& protocol, const std::vector<int64_t>& transform_indices);

// Collects D_cls softmax outputs of T_i(x) over a sample set, one
// matrix per scoring transform.
std::vector<Tensor> collect_transform_softmaxes(Encoder& en, Discriminator& disc, const std::vector<Sample>& samples,
                                                const Protocol& protocol, const std::vector<int64_t>& transform_indices,
                                                int64_t batch_size);

// Normality score sum_i (alpha_i - 1) . log softmax(D_cls(T_i(x),
// En(T_i(x)))); higher = more normal.  Anomaly score is its negation.
std::vector<double> dirichlet_scores(Encoder& en, Discriminator& disc, const Tensor& batch, const Protocol& protocol,
                                     const DirichletParams& params);

// Special functions backing the ML fit.
double digamma(double x);
double trigamma(double x);
double inverse_digamma(double y);

}  // namespace dgad
