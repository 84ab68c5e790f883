#include "eval/evaluation.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>

namespace dgad {

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------

RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) fail("roc_auc: scores and labels differ in length");
  if (scores.empty()) fail("roc_auc: empty input");
  int64_t n1 = 0, n0 = 0;
  for (int l : labels) {
    if (l == 1) {
      ++n1;
    } else if (l == 0) {
      ++n0;
    } else {
      fail("roc_auc: labels must be 0 or 1");
    }
  }
  if (n1 == 0 || n0 == 0) fail("roc_auc: both classes must be present");

  // Rank statistic with average ranks for ties.
  size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  RocResult res;
  res.auc = (rank_sum_pos - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1)) /
            (static_cast<double>(n1) * static_cast<double>(n0));

  // Threshold sweep over distinct scores, descending.
  res.points.push_back({0.0, 0.0});
  int64_t tp = 0, fp = 0;
  for (size_t i = n; i > 0;) {
    size_t j = i;
    while (j > 0 && scores[order[j - 1]] == scores[order[i - 1]]) --j;
    for (size_t k = j; k < i; ++k) {
      if (labels[order[k]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
    }
    res.points.push_back({static_cast<double>(fp) / static_cast<double>(n0), static_cast<double>(tp) / static_cast<double>(n1)});
    i = j;
  }
  return res;
}

// ---------------------------------------------------------------------------
// one-class evaluation
// ---------------------------------------------------------------------------

std::string scorer_name(Scorer s) { return s == Scorer::kRec ? "rec" : "dir"; }

Scorer scorer_from_name(const std::string& name) {
  if (name == "rec") return Scorer::kRec;
  if (name == "dir") return Scorer::kDir;
  fail("unknown scorer '" + name + "' (expected rec or dir)");
}

namespace {

std::vector<std::vector<int64_t>> split_batches(int64_t n, int64_t batch_size) {
  std::vector<std::vector<int64_t>> batches;
  for (int64_t start = 0; start < n; start += batch_size) {
    int64_t count = std::min(batch_size, n - start);
    std::vector<int64_t> idx(static_cast<size_t>(count));
    std::iota(idx.begin(), idx.end(), start);
    batches.push_back(std::move(idx));
  }
  return batches;
}

std::vector<double> score_batches(Encoder& en, Decoder& de, Discriminator& disc, const std::vector<Tensor>& batches,
                                  Scorer scorer, const Protocol& protocol, const DirichletParams* dir_params,
                                  double lambda_s) {
  std::vector<double> raw;
  for (const Tensor& batch : batches) {
    std::vector<double> part;
    if (scorer == Scorer::kRec) {
      part = reconstruction_scores(en, de, batch, lambda_s);
    } else {
      // Higher Dirichlet log-kernel means more normal; negate for anomaly.
      part = dirichlet_scores(en, disc, batch, protocol, *dir_params);
      for (double& v : part) v = -v;
    }
    raw.insert(raw.end(), part.begin(), part.end());
  }
  return raw;
}

}  // namespace

EvalResult evaluate_one_class(Encoder& en, Decoder& de, Discriminator& disc, const Dataset& test, int64_t normal_class,
                              Scorer scorer, const Protocol& protocol, const DirichletParams* dir_params,
                              const EvalOptions& opts) {
  if (test.samples.empty()) fail("evaluate_one_class: empty test split");
  if (opts.batch_size < 1) fail("batch_size must be >= 1");
  if (scorer == Scorer::kDir && dir_params == nullptr) fail("dirichlet scorer requires fitted concentration parameters");

  int64_t n = static_cast<int64_t>(test.samples.size());
  std::vector<int> labels(static_cast<size_t>(n));
  int64_t n_normal = 0;
  for (int64_t i = 0; i < n; ++i) {
    bool normal = test.samples[static_cast<size_t>(i)].class_id == normal_class;
    labels[static_cast<size_t>(i)] = normal ? 0 : 1;
    if (normal) ++n_normal;
  }
  if (n_normal == 0) fail("normal class " + std::to_string(normal_class) + " absent from test split");

  // Pre-stack batches so the timed section is network compute only.
  std::vector<Tensor> batches;
  for (const auto& idx : split_batches(n, opts.batch_size)) batches.push_back(stack_batch(test.samples, idx));

  EvalResult res;
  res.class_id = normal_class;
  res.scorer = scorer;
  res.n_normal = n_normal;
  res.n_anomalous = n - n_normal;

  std::vector<double> raw;
  if (opts.measure_throughput) {
    score_batches(en, de, disc, {batches.front()}, scorer, protocol, dir_params, opts.lambda_s);  // warmup
    auto t0 = std::chrono::steady_clock::now();
    raw = score_batches(en, de, disc, batches, scorer, protocol, dir_params, opts.lambda_s);
    auto t1 = std::chrono::steady_clock::now();
    double secs = std::chrono::duration<double>(t1 - t0).count();
    res.throughput = static_cast<double>(n) / std::max(secs, 1e-9);
  } else {
    raw = score_batches(en, de, disc, batches, scorer, protocol, dir_params, opts.lambda_s);
  }

  std::vector<double> norm = normalize_scores(raw);
  res.scores.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    AnomalyScore& s = res.scores[static_cast<size_t>(i)];
    s.sample_id = test.samples[static_cast<size_t>(i)].id;
    s.label = labels[static_cast<size_t>(i)];
    s.s_raw = raw[static_cast<size_t>(i)];
    s.s_norm = norm[static_cast<size_t>(i)];
  }
  RocResult roc = roc_auc(raw, labels);
  res.auc = roc.auc;
  res.roc = std::move(roc.points);
  return res;
}

// ---------------------------------------------------------------------------
// discriminator accuracy
// ---------------------------------------------------------------------------

std::pair<int64_t, int64_t> blockwise_argmax_counts(const Tensor& logits, const Tensor& labels,
                                                    const std::vector<int64_t>& blocks) {
  if (logits.rank() != 2 || labels.rank() != 2) fail("blockwise_argmax_counts expects [N,L] logits and labels");
  if (logits.dim(0) != labels.dim(0) || logits.dim(1) != labels.dim(1)) fail("logits/labels shape mismatch");
  int64_t total_width = 0;
  for (int64_t b : blocks) total_width += b;
  if (total_width != logits.dim(1)) fail("blocks do not cover the label width");
  int64_t N = logits.dim(0), L = logits.dim(1);
  int64_t correct = 0, total = 0;
  for (int64_t i = 0; i < N; ++i) {
    int64_t off = 0;
    for (int64_t b : blocks) {
      int64_t best = 0, truth = -1;
      for (int64_t k = 0; k < b; ++k) {
        if (logits[i * L + off + k] > logits[i * L + off + best]) best = k;
        if (labels[i * L + off + k] == 1.0) truth = k;
      }
      if (truth < 0) fail("label block has no active bit");
      if (best == truth) ++correct;
      ++total;
      off += b;
    }
  }
  return {correct, total};
}

double discriminator_accuracy(Encoder& en, Discriminator& disc, const Dataset& test, int64_t normal_class,
                              const Protocol& protocol, AccuracySubset subset, int64_t max_images, int64_t batch_size) {
  if (batch_size < 1) fail("batch_size must be >= 1");
  std::vector<Sample> chosen;
  for (const Sample& s : test.samples) {
    if (subset == AccuracySubset::kNormalOnly && s.class_id != normal_class) continue;
    chosen.push_back(s);
    if (max_images > 0 && static_cast<int64_t>(chosen.size()) >= max_images) break;
  }
  if (chosen.empty()) fail("discriminator_accuracy: no images selected");

  NoGrad ng;
  std::vector<int64_t> blocks = protocol.label_blocks();
  int64_t n = static_cast<int64_t>(chosen.size());
  int64_t correct = 0, total = 0;
  for (const auto& idx : split_batches(n, batch_size)) {
    Tensor batch = stack_batch(chosen, idx);
    for (int64_t t = 0; t < protocol.num_transforms(); ++t) {
      TransformSpec spec = protocol.transform_by_index(t);
      Tensor xt = apply_transform_batch(batch, spec, protocol.kind);
      Tensor label_row = protocol.encode_label(spec);
      Tensor labels({static_cast<int64_t>(idx.size()), protocol.label_dim()});
      for (size_t i = 0; i < idx.size(); ++i) {
        std::copy(label_row.data(), label_row.data() + label_row.numel(),
                  labels.data() + static_cast<int64_t>(i) * protocol.label_dim());
      }
      Var x = Var::leaf(std::move(xt), false);
      Var z = en.forward(x);
      DiscOut d = disc.forward(x, z);
      auto [c, tot] = blockwise_argmax_counts(d.cls.value(), labels, blocks);
      correct += c;
      total += tot;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// ablation grid
// ---------------------------------------------------------------------------

std::vector<AblationVariant> default_ablation_variants() {
  return {{VariantKind::kGanOnly, "GAN_ONLY"},
          {VariantKind::kNoCompact, "DGAD_MINUS_CL"},
          {VariantKind::kZeroPad, "DGAD_ZERO_PAD"},
          {VariantKind::kCoord, "DGAD_COORD"},
          {VariantKind::kFull, "DGAD"}};
}

AblationVariant variant_by_name(const std::string& name) {
  std::string valid;
  for (const AblationVariant& v : default_ablation_variants()) {
    if (v.name == name) return v;
    valid += (valid.empty() ? "" : ", ") + v.name;
  }
  fail("unknown ablation variant '" + name + "' (valid: " + valid + ")");
}

void apply_variant(const AblationVariant& v, LossWeights& weights, NetConfig& net, bool& pixel_restoration,
                   bool& use_compactness) {
  switch (v.kind) {
    case VariantKind::kGanOnly:
      weights.cls = 0.0;
      pixel_restoration = true;
      break;
    case VariantKind::kNoCompact:
      use_compactness = false;
      break;
    case VariantKind::kZeroPad:
      net.padding = PadMode::kZero;
      break;
    case VariantKind::kCoord:
      net.use_coord = true;
      break;
    case VariantKind::kFull:
      break;
  }
}

double AblationTable::cell_auc(const std::string& variant, Scorer scorer, int64_t class_id) const {
  for (const AblationCell& c : cells) {
    if (c.variant == variant && c.scorer == scorer && c.class_id == class_id) return c.auc;
  }
  fail("ablation cell not found: " + variant + "/" + scorer_name(scorer) + "/" + std::to_string(class_id));
}

double AblationTable::row_mean(const std::string& variant, Scorer scorer) const {
  double sum = 0.0;
  for (int64_t c : classes) sum += cell_auc(variant, scorer, c);
  return sum / static_cast<double>(classes.size());
}

AblationTable run_ablation_grid(const std::vector<AblationVariant>& variants, const std::vector<int64_t>& classes,
                                const std::vector<Scorer>& scorers, const CellTrainFn& train_cell,
                                const DatasetSpec& data, const Protocol& protocol, const GridOptions& opts) {
  if (variants.empty() || classes.empty() || scorers.empty()) fail("ablation grid needs variants, classes and scorers");
  AblationTable table;
  for (const AblationVariant& v : variants) table.variants.push_back(v.name);
  table.scorers = scorers;
  table.classes = classes;

  bool want_dir = std::find(scorers.begin(), scorers.end(), Scorer::kDir) != scorers.end();
  for (const AblationVariant& v : variants) {
    for (int64_t cls : classes) {
      TrainedModel model = train_cell(v, cls);
      Dataset test = load_dataset(data, Split::kTest, cls);
      DirichletParams dir_params;
      if (want_dir) {
        Dataset train = load_dataset(data, Split::kTrain, cls);
        std::vector<Sample> fit_samples = train.samples;
        if (opts.dir_fit_count > 0 && static_cast<int64_t>(fit_samples.size()) > opts.dir_fit_count) {
          fit_samples.resize(static_cast<size_t>(opts.dir_fit_count));
        }
        std::vector<int64_t> tindices = scoring_transforms(protocol, opts.dir_subsample, opts.dir_seed);
        std::vector<Tensor> softmaxes =
            collect_transform_softmaxes(*model.en, *model.disc, fit_samples, protocol, tindices, opts.eval.batch_size);
        dir_params = fit_dirichlet(softmaxes, protocol, tindices);
      }
      for (Scorer s : scorers) {
        EvalOptions eopts = opts.eval;
        eopts.measure_throughput = false;
        EvalResult res = evaluate_one_class(*model.en, *model.de, *model.disc, test, cls, s, protocol,
                                            want_dir ? &dir_params : nullptr, eopts);
        table.cells.push_back({v.name, s, cls, res.auc});
        std::cerr << "[ablate] " << v.name << " class=" << cls << " " << scorer_name(s) << " auc=" << res.auc << "\n";
      }
    }
  }
  return table;
}

std::string format_ablation_csv(const AblationTable& table, const std::vector<std::string>& class_names) {
  std::ostringstream out;
  out << "variant,scorer";
  for (size_t i = 0; i < table.classes.size(); ++i) {
    int64_t c = table.classes[i];
    if (c >= 0 && static_cast<size_t>(c) < class_names.size()) {
      out << "," << class_names[static_cast<size_t>(c)];
    } else {
      out << ",class_" << c;
    }
  }
  out << ",Mean\n";
  char buf[32];
  for (const std::string& v : table.variants) {
    for (Scorer s : table.scorers) {
      out << v << "," << scorer_name(s);
      for (int64_t c : table.classes) {
        std::snprintf(buf, sizeof(buf), "%.4f", table.cell_auc(v, s, c));
        out << "," << buf;
      }
      std::snprintf(buf, sizeof(buf), "%.4f", table.row_mean(v, s));
      out << "," << buf << "\n";
    }
  }
  return out.str();
}

}  // namespace dgad
