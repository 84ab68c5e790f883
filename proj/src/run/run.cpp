#include "run/run.h"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"

#include "eval/evaluation.h"
#include "eval/plots.h"
#include "train/trainer.h"

namespace dgad {

namespace fs = std::filesystem;
using nlohmann::json;

std::string class_dir(const RunConfig& cfg, int64_t cls) {
  return cfg.train.run_dir + "/class_" + std::to_string(cls);
}

std::string find_latest_checkpoint(const std::string& class_dir) {
  if (!fs::exists(class_dir)) fail("missing run directory: " + class_dir);
  int64_t best = -1;
  for (const auto& entry : fs::directory_iterator(class_dir)) {
    if (!entry.is_directory()) continue;
    std::string name = entry.path().filename().string();
    if (name.rfind("ckpt-", 0) != 0) continue;
    try {
      best = std::max(best, static_cast<int64_t>(std::stoll(name.substr(5))));
    } catch (const std::exception&) {
      continue;
    }
  }
  if (best < 0) fail("no checkpoint found under " + class_dir + " (expected " + class_dir + "/ckpt-<iteration>)");
  return class_dir + "/ckpt-" + std::to_string(best);
}

namespace {

std::vector<Scorer> scorers_from(const std::string& score) {
  if (score == "rec") return {Scorer::kRec};
  if (score == "dir") return {Scorer::kDir};
  if (score == "both") return {Scorer::kRec, Scorer::kDir};
  fail("score must be rec, dir or both, got '" + score + "'");
}

std::vector<int64_t> class_list(const RunConfig& cfg, const Dataset& test) {
  int64_t n_classes = static_cast<int64_t>(test.class_names.size());
  if (cfg.test_object >= 0) {
    if (cfg.test_object >= n_classes) {
      fail("test_object " + std::to_string(cfg.test_object) + " out of range (dataset has " +
           std::to_string(n_classes) + " classes)");
    }
    return {cfg.test_object};
  }
  std::vector<int64_t> all(static_cast<size_t>(n_classes));
  for (int64_t i = 0; i < n_classes; ++i) all[static_cast<size_t>(i)] = i;
  return all;
}

void cap_samples(std::vector<Sample>& samples, int64_t cap) {
  if (cap > 0 && static_cast<int64_t>(samples.size()) > cap) samples.resize(static_cast<size_t>(cap));
}

void prepare_run_dir(const std::string& dir, bool force, bool keep_existing) {
  if (fs::exists(dir)) {
    if (keep_existing) return;
    if (!force) fail("run directory already exists: " + dir + " (pass --force to overwrite)");
    fs::remove_all(dir);
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail("cannot create " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  out << text;
  if (!out) fail("write failed: " + path);
}

DirichletParams fit_dir_params(const RunConfig& cfg, const DatasetSpec& spec, const Protocol& protocol, Encoder& en,
                               Discriminator& disc, int64_t cls) {
  Dataset train = load_dataset(spec, Split::kTrain, static_cast<int>(cls));
  cap_samples(train.samples, cfg.train_count);
  cap_samples(train.samples, cfg.dir_fit_count);
  std::vector<int64_t> tindices = scoring_transforms(protocol, cfg.dir_subsample, cfg.train.seed);
  std::vector<Tensor> soft =
      collect_transform_softmaxes(en, disc, train.samples, protocol, tindices, cfg.train.batch_size);
  return fit_dirichlet(soft, protocol, tindices);
}

}  // namespace

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void cmd_train(RunConfig cfg) {
  finalize_config(cfg);
  DatasetSpec spec = make_dataset_spec(cfg);
  Dataset test = load_dataset(spec, Split::kTest, 0);
  for (int64_t cls : class_list(cfg, test)) {
    std::string dir = class_dir(cfg, cls);
    bool resuming = cfg.resume && fs::exists(dir);
    prepare_run_dir(dir, cfg.force, resuming);
    write_text(dir + "/manifest.json", run_manifest_json(cfg, cls));

    Dataset train = load_dataset(spec, Split::kTrain, static_cast<int>(cls));
    cap_samples(train.samples, cfg.train_count);

    TrainConfig tc = cfg.train;
    tc.run_dir = dir;
    std::unique_ptr<Trainer> trainer;
    if (resuming) {
      trainer = Trainer::load(find_latest_checkpoint(dir));
      require_compatible(trainer->cfg, tc);
      trainer->cfg.run_dir = dir;
      trainer->cfg.iterations = tc.iterations;
      trainer->cfg.epochs = tc.epochs;
      trainer->cfg.checkpoint_every = tc.checkpoint_every;
    } else {
      trainer = std::make_unique<Trainer>(tc);
    }
    std::cerr << "[train] class " << cls << " (" << test.class_names[static_cast<size_t>(cls)] << "), "
              << train.samples.size() << " samples -> " << dir << "\n";
    std::string ckpt = trainer->train(train);
    std::cerr << "[train] class " << cls << " done: " << ckpt << "\n";
  }
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

void cmd_test(RunConfig cfg) {
  finalize_config(cfg);
  DatasetSpec spec = make_dataset_spec(cfg);
  Dataset test = load_dataset(spec, Split::kTest, 0);
  // The synthetic split already honors test_count per class; truncating
  // again would drop whole classes.
  if (spec.kind != DatasetKind::kSynthetic) cap_samples(test.samples, cfg.test_count);
  std::vector<Scorer> scorers = scorers_from(cfg.score);
  Protocol protocol = Protocol::from_int(cfg.train.protocol_id);
  std::vector<int64_t> classes = class_list(cfg, test);

  std::string results_root = cfg.train.run_dir + "/results";
  std::error_code ec;
  fs::create_directories(results_root, ec);
  if (ec) fail("cannot create " + results_root + ": " + ec.message());

  std::vector<std::vector<double>> summary(scorers.size());  // [scorer][class]
  for (int64_t cls : classes) {
    std::string ckpt = find_latest_checkpoint(class_dir(cfg, cls));
    std::unique_ptr<Trainer> trainer = Trainer::load(ckpt);
    require_compatible(trainer->cfg, cfg.train);
    std::string rdir = results_root + "/class_" + std::to_string(cls);
    fs::create_directories(rdir, ec);
    if (ec) fail("cannot create " + rdir + ": " + ec.message());

    bool want_dir = std::find(scorers.begin(), scorers.end(), Scorer::kDir) != scorers.end();
    DirichletParams dp;
    if (want_dir) dp = fit_dir_params(cfg, spec, protocol, *trainer->en, *trainer->disc, cls);

    json results = json::array();
    for (size_t si = 0; si < scorers.size(); ++si) {
      Scorer s = scorers[si];
      EvalOptions opts;
      opts.batch_size = cfg.train.batch_size;
      opts.lambda_s = cfg.lambda_score;
      opts.measure_throughput = true;
      EvalResult res = evaluate_one_class(*trainer->en, *trainer->de, *trainer->disc, test, cls, s, protocol,
                                          want_dir ? &dp : nullptr, opts);
      summary[si].push_back(res.auc);

      std::string csv = "sample_id,label,s_raw,s_norm\n";
      char row[256];
      for (const AnomalyScore& a : res.scores) {
        std::snprintf(row, sizeof(row), "%s,%d,%.17g,%.17g\n", a.sample_id.c_str(), a.label, a.s_raw, a.s_norm);
        csv += row;
      }
      write_text(rdir + "/scores_" + scorer_name(s) + ".csv", csv);

      std::vector<double> norm_n, norm_a;
      for (const AnomalyScore& a : res.scores) (a.label == 0 ? norm_n : norm_a).push_back(a.s_norm);
      std::string title = test.class_names[static_cast<size_t>(cls)] + " (" + scorer_name(s) + ")";
      write_roc_svg(rdir + "/roc_" + scorer_name(s) + ".svg", res.roc, res.auc, "ROC " + title);
      write_histogram_svg(rdir + "/hist_" + scorer_name(s) + ".svg", norm_n, norm_a, 30, "scores " + title);
      if (si == 0) {
        write_roc_svg(rdir + "/roc.svg", res.roc, res.auc, "ROC " + title);
        write_histogram_svg(rdir + "/hist.svg", norm_n, norm_a, 30, "scores " + title);
      }

      json roc = json::array();
      for (const RocPoint& p : res.roc) roc.push_back({p.fpr, p.tpr});
      results.push_back({{"scorer", scorer_name(s)},
                         {"auc", res.auc},
                         {"throughput_ips", res.throughput},
                         {"n_normal", res.n_normal},
                         {"n_anomalous", res.n_anomalous},
                         {"roc", roc}});
      std::cerr << "[test] class " << cls << " " << scorer_name(s) << " auc=" << res.auc
                << " throughput=" << res.throughput << " im/s\n";
    }
    if (cfg.disc_accuracy) {
      double acc_normal = discriminator_accuracy(*trainer->en, *trainer->disc, test, cls, protocol,
                                                 AccuracySubset::kNormalOnly, cfg.disc_accuracy_images,
                                                 cfg.train.batch_size);
      double acc_all = discriminator_accuracy(*trainer->en, *trainer->disc, test, cls, protocol, AccuracySubset::kAll,
                                              cfg.disc_accuracy_images, cfg.train.batch_size);
      json acc{{"normal_only", acc_normal}, {"all", acc_all}, {"gap", acc_normal - acc_all},
               {"max_images", cfg.disc_accuracy_images}};
      write_text(rdir + "/disc_accuracy.json", acc.dump(2) + "\n");
      std::cerr << "[test] class " << cls << " disc accuracy normal=" << acc_normal << " all=" << acc_all << "\n";
    }
    json eval{{"class_id", cls}, {"class_name", test.class_names[static_cast<size_t>(cls)]}, {"results", results}};
    write_text(rdir + "/eval.json", eval.dump(2) + "\n");
  }

  std::string csv = "scorer";
  for (int64_t cls : classes) csv += "," + test.class_names[static_cast<size_t>(cls)];
  csv += ",Mean\n";
  char cell[32];
  for (size_t si = 0; si < scorers.size(); ++si) {
    csv += scorer_name(scorers[si]);
    double sum = 0.0;
    for (double auc : summary[si]) {
      std::snprintf(cell, sizeof(cell), ",%.4f", auc);
      csv += cell;
      sum += auc;
    }
    std::snprintf(cell, sizeof(cell), ",%.4f", sum / static_cast<double>(summary[si].size()));
    csv += cell;
    csv += "\n";
  }
  write_text(results_root + "/summary.csv", csv);
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

void cmd_ablate(RunConfig cfg) {
  finalize_config(cfg);
  DatasetSpec spec = make_dataset_spec(cfg);
  Dataset test = load_dataset(spec, Split::kTest, 0);
  std::vector<int64_t> classes = class_list(cfg, test);
  std::vector<Scorer> scorers = scorers_from(cfg.score);
  Protocol protocol = Protocol::from_int(cfg.train.protocol_id);

  std::vector<AblationVariant> variants;
  std::string token;
  for (size_t i = 0; i <= cfg.variants.size(); ++i) {
    if (i == cfg.variants.size() || cfg.variants[i] == ',') {
      if (!token.empty()) variants.push_back(variant_by_name(token));
      token.clear();
    } else if (!std::isspace(static_cast<unsigned char>(cfg.variants[i]))) {
      token += cfg.variants[i];
    }
  }
  if (variants.empty()) fail("no ablation variants requested");

  std::string ablate_root = cfg.train.run_dir + "/ablate";
  CellTrainFn train_cell = [&](const AblationVariant& v, int64_t cls) -> TrainedModel {
    TrainConfig tc = cfg.train;
    bool pixel = tc.pixel_restoration, compact = tc.compactness_enabled;
    apply_variant(v, tc.weights, tc.net, pixel, compact);
    tc.pixel_restoration = pixel;
    tc.compactness_enabled = compact;
    tc.run_dir = ablate_root + "/" + v.name + "/class_" + std::to_string(cls);
    prepare_run_dir(tc.run_dir, cfg.force, false);

    RunConfig echo = cfg;
    echo.train = tc;
    write_text(tc.run_dir + "/manifest.json", run_manifest_json(echo, cls));

    Dataset train = load_dataset(spec, Split::kTrain, static_cast<int>(cls));
    cap_samples(train.samples, cfg.train_count);
    std::cerr << "[ablate] training " << v.name << " class " << cls << " (" << train.samples.size() << " samples)\n";
    Trainer trainer(tc);
    trainer.train(train);
    return TrainedModel{tc.net, std::move(trainer.en), std::move(trainer.de), std::move(trainer.disc)};
  };

  GridOptions gopts;
  gopts.eval.batch_size = cfg.train.batch_size;
  gopts.eval.lambda_s = cfg.lambda_score;
  gopts.dir_subsample = cfg.dir_subsample;
  gopts.dir_seed = cfg.train.seed;
  gopts.dir_fit_count = cfg.dir_fit_count;
  AblationTable table = run_ablation_grid(variants, classes, scorers, train_cell, spec, protocol, gopts);

  std::vector<std::string> names;
  for (int64_t cls : classes) names.push_back(test.class_names[static_cast<size_t>(cls)]);
  // format_ablation_csv indexes class names by class id.
  std::vector<std::string> by_id(test.class_names.begin(), test.class_names.end());
  std::error_code ec;
  fs::create_directories(ablate_root, ec);
  write_text(ablate_root + "/ablation.csv", format_ablation_csv(table, by_id));
  std::cerr << "[ablate] wrote " << ablate_root << "/ablation.csv\n";
}

}  // namespace dgad
