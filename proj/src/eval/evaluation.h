#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "core/tensor.h"
#include "data/dataset.h"
#include "eval/plots.h"
#include "losses/losses.h"
#include "nn/networks.h"
#include "pretext/pretext.h"
#include "score/scoring.h"

namespace dgad {

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------

struct RocResult {
  double auc = 0.0;
  std::vector<RocPoint> points;  // starts (0,0), ends (1,1), nondecreasing
};

// Labels: 1 = anomalous, 0 = normal; higher score = more anomalous.
// AUC via the Mann-Whitney rank statistic, ties counted 1/2.
RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// one-class evaluation
// ---------------------------------------------------------------------------

enum class Scorer { kRec, kDir };

std::string scorer_name(Scorer s);
Scorer scorer_from_name(const std::string& name);

struct EvalResult {
  int64_t class_id = -1;
  Scorer scorer = Scorer::kRec;
  double auc = 0.0;
  std::vector<RocPoint> roc;
  double throughput = 0.0;  // images per second, compute only
  int64_t n_normal = 0;
  int64_t n_anomalous = 0;
  std::vector<AnomalyScore> scores;  // one entry per test sample, split order
};

struct EvalOptions {
  int64_t batch_size = 32;
  double lambda_s = 10.0;
  bool measure_throughput = true;
};

// Scores the whole test split (normal class -> label 0, everything else 1),
// normalizes scores to [0,1], and computes AUC. For Scorer::kDir the fitted
// concentration parameters must be supplied.
EvalResult evaluate_one_class(Encoder& en, Decoder& de, Discriminator& disc, const Dataset& test, int64_t normal_class,
                              Scorer scorer, const Protocol& protocol, const DirichletParams* dir_params,
                              const EvalOptions& opts);

// ---------------------------------------------------------------------------
// discriminator accuracy (supplementary analysis)
// ---------------------------------------------------------------------------

enum class AccuracySubset { kNormalOnly, kAll };

// Counts per-block argmax hits of cls logits against multi-hot labels.
// Returns (correct blocks, total blocks).
std::pair<int64_t, int64_t> blockwise_argmax_counts(const Tensor& logits, const Tensor& labels,
                                                    const std::vector<int64_t>& blocks);

// Fraction of correct per-block argmax predictions over every protocol
// transform of every selected test image. max_images = 0 means no cap.
double discriminator_accuracy(Encoder& en, Discriminator& disc, const Dataset& test, int64_t normal_class,
                              const Protocol& protocol, AccuracySubset subset, int64_t max_images, int64_t batch_size);

// ---------------------------------------------------------------------------
// ablation grid
// ---------------------------------------------------------------------------

enum class VariantKind { kGanOnly, kNoCompact, kZeroPad, kCoord, kFull };

struct AblationVariant {
  VariantKind kind = VariantKind::kFull;
  std::string name;
};

std::vector<AblationVariant> default_ablation_variants();
AblationVariant variant_by_name(const std::string& name);

// Applies a variant's configuration deltas on top of the base setup.
void apply_variant(const AblationVariant& v, LossWeights& weights, NetConfig& net, bool& pixel_restoration,
                   bool& use_compactness);

struct AblationCell {
  std::string variant;
  Scorer scorer = Scorer::kRec;
  int64_t class_id = -1;
  double auc = 0.0;
};

struct AblationTable {
  std::vector<std::string> variants;  // row groups, listed order
  std::vector<Scorer> scorers;        // rows within a group
  std::vector<int64_t> classes;       // columns
  std::vector<AblationCell> cells;    // |variants| * |scorers| * |classes|

  double cell_auc(const std::string& variant, Scorer scorer, int64_t class_id) const;
  double row_mean(const std::string& variant, Scorer scorer) const;
};

struct TrainedModel {
  NetConfig net;
  std::unique_ptr<Encoder> en;
  std::unique_ptr<Decoder> de;
  std::unique_ptr<Discriminator> disc;
};

// Trains one grid cell: the callback receives the variant and normal class
// and returns the trained networks.
using CellTrainFn = std::function<TrainedModel(const AblationVariant&, int64_t normal_class)>;

struct GridOptions {
  EvalOptions eval;
  bool dir_subsample = true;
  uint64_t dir_seed = 1;
  int64_t dir_fit_count = 0;  // 0 = whole train split
};

AblationTable run_ablation_grid(const std::vector<AblationVariant>& variants, const std::vector<int64_t>& classes,
                                const std::vector<Scorer>& scorers, const CellTrainFn& train_cell,
                                const DatasetSpec& data, const Protocol& protocol, const GridOptions& opts);

// CSV with one row per variant x scorer, one column per class, then Mean.
std::string format_ablation_csv(const AblationTable& table, const std::vector<std::string>& class_names);

}  // namespace dgad
