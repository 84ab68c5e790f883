#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "eval/evaluation.h"
#include "helpers.h"

using namespace dgad;
using testutil::random_tensor;
using testutil::tiny_net_config;

namespace {

// O(n^2) pair-counting oracle: P(anomalous > normal) + 0.5 P(tie).
double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("auc on the worked four-point example is 0.75") {
  RocResult r = roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});
  CHECK(r.auc == doctest::Approx(0.75));
}

TEST_CASE("auc endpoints: perfect, inverted and constant scorers") {
  CHECK(roc_auc({1, 2, 3, 10, 11, 12}, {0, 0, 0, 1, 1, 1}).auc == doctest::Approx(1.0));
  CHECK(roc_auc({10, 11, 12, 1, 2, 3}, {0, 0, 0, 1, 1, 1}).auc == doctest::Approx(0.0));
  CHECK(roc_auc({5, 5, 5, 5}, {0, 1, 0, 1}).auc == doctest::Approx(0.5));
}

TEST_CASE("auc equals the brute-force pair count on random instances") {
  RngStream rng(101);
  for (int rep = 0; rep < 120; ++rep) {
    int64_t n = rng.uniform_int(2, 200);
    std::vector<double> scores;
    std::vector<int> labels;
    int64_t pos = 0;
    for (int64_t i = 0; i < n; ++i) {
      // quantized scores produce plenty of ties
      scores.push_back(std::round(rng.uniform(0.0, 1.0) * 8.0) / 8.0);
      labels.push_back(rng.uniform() < 0.4 ? 1 : 0);
      pos += labels.back();
    }
    if (pos == 0) labels[static_cast<size_t>(rng.uniform_int(0, n - 1))] = 1;
    if (pos == n) labels[static_cast<size_t>(rng.uniform_int(0, n - 1))] = 0;
    double want = brute_force_auc(scores, labels);
    CHECK(roc_auc(scores, labels).auc == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
  RngStream rng(102);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    scores.push_back(rng.normal());
    labels.push_back(i % 3 == 0 ? 1 : 0);
  }
  double base = roc_auc(scores, labels).auc;
  std::vector<double> mapped;
  for (double s : scores) mapped.push_back(std::exp(2.0 * s) - 5.0);
  CHECK(roc_auc(mapped, labels).auc == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("roc curves start at (0,0), end at (1,1) and never decrease") {
  RngStream rng(103);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 80; ++i) {
    scores.push_back(std::round(rng.uniform(0.0, 1.0) * 10.0) / 10.0);
    labels.push_back(rng.uniform() < 0.5 ? 1 : 0);
  }
  labels[0] = 0;
  labels[1] = 1;
  RocResult r = roc_auc(scores, labels);
  REQUIRE(r.points.size() >= 2);
  CHECK(r.points.front().fpr == 0.0);
  CHECK(r.points.front().tpr == 0.0);
  CHECK(r.points.back().fpr == doctest::Approx(1.0));
  CHECK(r.points.back().tpr == doctest::Approx(1.0));
  for (size_t i = 1; i < r.points.size(); ++i) {
    CHECK(r.points[i].fpr >= r.points[i - 1].fpr);
    CHECK(r.points[i].tpr >= r.points[i - 1].tpr);
  }
}

TEST_CASE("auc requires both classes") {
  CHECK_THROWS_AS((void)roc_auc({1.0, 2.0}, {0, 0}), Error);
  CHECK_THROWS_AS((void)roc_auc({1.0, 2.0}, {1, 1}), Error);
  CHECK_THROWS_AS((void)roc_auc({}, {}), Error);
}

TEST_CASE("blockwise argmax counts match oracles and chance") {
  // an oracle scorer: logits spike exactly at the labeled bit
  std::vector<int64_t> blocks{6, 4, 4, 4};
  RngStream rng(104);
  Tensor logits({10, 18}, 0.0);
  Tensor labels({10, 18}, 0.0);
  for (int64_t n = 0; n < 10; ++n) {
    int64_t off = 0;
    for (int64_t b : blocks) {
      int64_t hot = rng.uniform_int(0, b - 1);
      labels[n * 18 + off + hot] = 1.0;
      logits[n * 18 + off + hot] = 5.0;
      off += b;
    }
  }
  auto [hit, total] = blockwise_argmax_counts(logits, labels, blocks);
  CHECK(total == 40);
  CHECK(hit == 40);

  // uniform random logits sit at chance level per block
  int64_t chance_hits = 0, chance_total = 0;
  for (int rep = 0; rep < 300; ++rep) {
    Tensor rl = random_tensor({12, 6}, rng);
    Tensor lab({12, 6}, 0.0);
    for (int64_t n = 0; n < 12; ++n) lab[n * 6 + rng.uniform_int(0, 5)] = 1.0;
    auto [h, t] = blockwise_argmax_counts(rl, lab, {6});
    chance_hits += h;
    chance_total += t;
  }
  double rate = static_cast<double>(chance_hits) / static_cast<double>(chance_total);
  CHECK(chance_total == 3600);
  CHECK(rate == doctest::Approx(1.0 / 6.0).epsilon(0.15));
}

TEST_CASE("evaluate_one_class scores a synthetic split end to end") {
  NetConfig cfg = tiny_net_config();
  RngStream rng(105);
  Encoder en(cfg, rng);
  Decoder de(cfg, rng);
  Discriminator disc(cfg, rng);
  Protocol p1 = Protocol::from_int(1);

  DatasetSpec spec;
  spec.kind = DatasetKind::kSynthetic;
  spec.image_size = 8;
  spec.test_count = 10;
  Dataset test = load_dataset(spec, Split::kTest, 0);

  EvalOptions opts;
  opts.batch_size = 4;
  opts.measure_throughput = true;
  EvalResult r = evaluate_one_class(en, de, disc, test, 0, Scorer::kRec, p1, nullptr, opts);
  CHECK(r.n_normal == 10);
  CHECK(r.n_anomalous == 10);
  CHECK(r.scores.size() == 20);
  CHECK(r.auc >= 0.0);
  CHECK(r.auc <= 1.0);
  CHECK(r.throughput > 0.0);
  for (const auto& s : r.scores) {
    CHECK(s.s_norm >= 0.0);
    CHECK(s.s_norm <= 1.0);
    CHECK((s.label == 0 || s.label == 1));
  }
  // deterministic on repeat
  EvalResult r2 = evaluate_one_class(en, de, disc, test, 0, Scorer::kRec, p1, nullptr, opts);
  CHECK(r2.auc == r.auc);
  for (size_t i = 0; i < r.scores.size(); ++i) CHECK(r2.scores[i].s_raw == r.scores[i].s_raw);

  // dirichlet scorer needs parameters
  CHECK_THROWS_AS((void)evaluate_one_class(en, de, disc, test, 0, Scorer::kDir, p1, nullptr, opts), Error);
  // absent normal class is an error
  CHECK_THROWS_AS((void)evaluate_one_class(en, de, disc, test, 5, Scorer::kRec, p1, nullptr, opts), Error);
}

TEST_CASE("scorer names round-trip") {
  CHECK(scorer_name(Scorer::kRec) == "rec");
  CHECK(scorer_name(Scorer::kDir) == "dir");
  CHECK(scorer_from_name("rec") == Scorer::kRec);
  CHECK(scorer_from_name("dir") == Scorer::kDir);
  CHECK_THROWS_AS((void)scorer_from_name("bogus"), Error);
}

TEST_CASE("ablation variants apply the documented deltas") {
  LossWeights w;
  NetConfig net;
  bool pixel = false, cmp = true;
  apply_variant(variant_by_name("GAN_ONLY"), w, net, pixel, cmp);
  CHECK(w.cls == 0.0);
  CHECK(pixel);

  w = LossWeights{};
  pixel = false;
  cmp = true;
  apply_variant(variant_by_name("DGAD_MINUS_CL"), w, net, pixel, cmp);
  CHECK_FALSE(cmp);
  CHECK(w.cls == 10.0);

  net = NetConfig{};
  apply_variant(variant_by_name("DGAD_ZERO_PAD"), w, net, pixel, cmp);
  CHECK(net.padding == PadMode::kZero);

  net = NetConfig{};
  apply_variant(variant_by_name("DGAD_COORD"), w, net, pixel, cmp);
  CHECK(net.use_coord);

  w = LossWeights{};
  net = NetConfig{};
  pixel = false;
  cmp = true;
  apply_variant(variant_by_name("DGAD"), w, net, pixel, cmp);
  CHECK(w.cls == 10.0);
  CHECK(net.padding == PadMode::kSymmetric);
  CHECK_FALSE(pixel);
  CHECK(cmp);

  CHECK_THROWS_AS((void)variant_by_name("NOPE"), Error);
  CHECK(default_ablation_variants().size() == 5);
}

TEST_CASE("ablation grid shapes, means and csv layout") {
  NetConfig cfg = tiny_net_config();
  Protocol p1 = Protocol::from_int(1);
  DatasetSpec spec;
  spec.kind = DatasetKind::kSynthetic;
  spec.image_size = 8;
  spec.test_count = 6;
  spec.train_count = 8;

  auto train_cell = [&](const AblationVariant& v, int64_t cls) {
    (void)v;
    TrainedModel m;
    m.net = cfg;
    RngStream r(200 + static_cast<uint64_t>(cls));
    m.en = std::make_unique<Encoder>(cfg, r);
    m.de = std::make_unique<Decoder>(cfg, r);
    m.disc = std::make_unique<Discriminator>(cfg, r);
    return m;
  };

  std::vector<AblationVariant> variants{variant_by_name("GAN_ONLY"), variant_by_name("DGAD")};
  std::vector<Scorer> scorers{Scorer::kRec, Scorer::kDir};
  GridOptions opts;
  opts.eval.batch_size = 4;
  opts.eval.measure_throughput = false;
  opts.dir_fit_count = 8;
  AblationTable table = run_ablation_grid(variants, {0, 1}, scorers, train_cell, spec, p1, opts);
  CHECK(table.cells.size() == 2 * 2 * 2);
  for (const auto& c : table.cells) {
    CHECK(c.auc >= 0.0);
    CHECK(c.auc <= 1.0);
  }
  double mean = table.row_mean("DGAD", Scorer::kRec);
  double byhand = 0.5 * (table.cell_auc("DGAD", Scorer::kRec, 0) + table.cell_auc("DGAD", Scorer::kRec, 1));
  CHECK(mean == doctest::Approx(byhand));

  std::string csv = format_ablation_csv(table, {"rectangle", "ellipse"});
  // header + one row per variant x scorer
  int64_t lines = static_cast<int64_t>(std::count(csv.begin(), csv.end(), '\n'));
  CHECK(lines == 1 + 2 * 2);
  CHECK(csv.rfind("variant,scorer,rectangle,ellipse,Mean", 0) == 0);
}
