#include "util/config.h"

#include <chrono>
#include <fstream>

#include "json.hpp"
#include "pretext/pretext.h"

namespace dgad {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\''))) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int64_t out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    fail("config key '" + key + "' expects an integer, got '" + v + "'");
  }
}

uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    fail("config key '" + key + "' expects an unsigned integer, got '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    fail("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail("config key '" + key + "' expects a boolean, got '" + v + "'");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& raw) {
  std::string v = unquote(trim(raw));
  if (key == "dataset") cfg.dataset = v;
  else if (key == "data_root") cfg.data_root = v;
  else if (key == "image_size") cfg.image_size = parse_int(key, v);
  else if (key == "image_channels") cfg.image_channels = parse_int(key, v);
  else if (key == "train_count") cfg.train_count = parse_int(key, v);
  else if (key == "test_count") cfg.test_count = parse_int(key, v);
  else if (key == "test_object") cfg.test_object = parse_int(key, v);
  else if (key == "run_dir") cfg.train.run_dir = v;
  else if (key == "protocol") cfg.train.protocol_id = static_cast<int>(parse_int(key, v));
  else if (key == "padding") {
    if (v == "symmetric") cfg.train.net.padding = PadMode::kSymmetric;
    else if (v == "zero") cfg.train.net.padding = PadMode::kZero;
    else fail("config key 'padding' expects symmetric or zero, got '" + v + "'");
  } else if (key == "coord") cfg.train.net.use_coord = parse_bool(key, v);
  else if (key == "base_width") cfg.train.net.base_width = parse_int(key, v);
  else if (key == "latent_channels") cfg.train.net.latent_channels = parse_int(key, v);
  else if (key == "compactness") cfg.train.compactness_enabled = parse_bool(key, v);
  else if (key == "restoration") {
    if (v == "discriminator") cfg.train.pixel_restoration = false;
    else if (v == "pixel") cfg.train.pixel_restoration = true;
    else fail("config key 'restoration' expects discriminator or pixel, got '" + v + "'");
  } else if (key == "lambda_cls") cfg.train.weights.cls = parse_real(key, v);
  else if (key == "lambda_rec") cfg.train.weights.rec = parse_real(key, v);
  else if (key == "lambda_cmp") cfg.train.weights.cmp = parse_real(key, v);
  else if (key == "lambda_score") cfg.lambda_score = parse_real(key, v);
  else if (key == "batch_size") cfg.train.batch_size = parse_int(key, v);
  else if (key == "learning_rate") cfg.train.learning_rate = parse_real(key, v);
  else if (key == "adam_beta1") cfg.train.adam_beta1 = parse_real(key, v);
  else if (key == "adam_beta2") cfg.train.adam_beta2 = parse_real(key, v);
  else if (key == "iterations") cfg.train.iterations = parse_int(key, v);
  else if (key == "epochs") cfg.train.epochs = parse_int(key, v);
  else if (key == "checkpoint_every") cfg.train.checkpoint_every = parse_int(key, v);
  else if (key == "seed") cfg.train.seed = parse_uint(key, v);
  else if (key == "augment_zoom") cfg.train.augment_zoom = parse_bool(key, v);
  else if (key == "score") {
    if (v != "rec" && v != "dir" && v != "both") fail("config key 'score' expects rec, dir or both, got '" + v + "'");
    cfg.score = v;
  } else if (key == "dir_subsample") cfg.dir_subsample = parse_bool(key, v);
  else if (key == "dir_fit_count") cfg.dir_fit_count = parse_int(key, v);
  else if (key == "disc_accuracy") cfg.disc_accuracy = parse_bool(key, v);
  else if (key == "disc_accuracy_images") cfg.disc_accuracy_images = parse_int(key, v);
  else if (key == "variants") cfg.variants = v;
  else if (key == "force") cfg.force = parse_bool(key, v);
  else if (key == "resume") cfg.resume = parse_bool(key, v);
  else fail("unknown config key '" + key + "'");
}

std::string read_config_key(const RunConfig& cfg, const std::string& key) {
  if (key == "dataset") return cfg.dataset;
  if (key == "data_root") return cfg.data_root;
  if (key == "image_size") return std::to_string(cfg.image_size);
  if (key == "image_channels") return std::to_string(cfg.image_channels);
  if (key == "train_count") return std::to_string(cfg.train_count);
  if (key == "test_count") return std::to_string(cfg.test_count);
  if (key == "test_object") return std::to_string(cfg.test_object);
  if (key == "run_dir") return cfg.train.run_dir;
  if (key == "protocol") return std::to_string(cfg.train.protocol_id);
  if (key == "padding") return cfg.train.net.padding == PadMode::kZero ? "zero" : "symmetric";
  if (key == "coord") return bool_str(cfg.train.net.use_coord);
  if (key == "base_width") return std::to_string(cfg.train.net.base_width);
  if (key == "latent_channels") return std::to_string(cfg.train.net.latent_channels);
  if (key == "compactness") return bool_str(cfg.train.compactness_enabled);
  if (key == "restoration") return cfg.train.pixel_restoration ? "pixel" : "discriminator";
  if (key == "lambda_cls") return std::to_string(cfg.train.weights.cls);
  if (key == "lambda_rec") return std::to_string(cfg.train.weights.rec);
  if (key == "lambda_cmp") return std::to_string(cfg.train.weights.cmp);
  if (key == "lambda_score") return std::to_string(cfg.lambda_score);
  if (key == "batch_size") return std::to_string(cfg.train.batch_size);
  if (key == "learning_rate") return std::to_string(cfg.train.learning_rate);
  if (key == "adam_beta1") return std::to_string(cfg.train.adam_beta1);
  if (key == "adam_beta2") return std::to_string(cfg.train.adam_beta2);
  if (key == "iterations") return std::to_string(cfg.train.iterations);
  if (key == "epochs") return std::to_string(cfg.train.epochs);
  if (key == "checkpoint_every") return std::to_string(cfg.train.checkpoint_every);
  if (key == "seed") return std::to_string(cfg.train.seed);
  if (key == "augment_zoom") return bool_str(cfg.train.augment_zoom);
  if (key == "score") return cfg.score;
  if (key == "dir_subsample") return bool_str(cfg.dir_subsample);
  if (key == "dir_fit_count") return std::to_string(cfg.dir_fit_count);
  if (key == "disc_accuracy") return bool_str(cfg.disc_accuracy);
  if (key == "disc_accuracy_images") return std::to_string(cfg.disc_accuracy_images);
  if (key == "variants") return cfg.variants;
  if (key == "force") return bool_str(cfg.force);
  if (key == "resume") return bool_str(cfg.resume);
  fail("unknown config key '" + key + "'");
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read config file: " + path);
  RunConfig cfg;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos) fail(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(path + ":" + std::to_string(lineno) + ": empty key");
    apply_config_kv(cfg, key, value);
  }
  return cfg;
}

void finalize_config(RunConfig& cfg) {
  dataset_kind_from_string(cfg.dataset);  // validates the name
  cfg.train.net.image_size = cfg.image_size;
  cfg.train.net.image_channels = cfg.image_channels;
  cfg.train.net.label_dim = Protocol::from_int(cfg.train.protocol_id).label_dim();
  if (cfg.lambda_score < 0.0) fail("lambda_score must be non-negative");
  if (cfg.train_count < 0 || cfg.test_count < 0) fail("train_count/test_count must be >= 0");
  if (cfg.dir_fit_count < 0) fail("dir_fit_count must be >= 0");
  if (cfg.disc_accuracy_images < 0) fail("disc_accuracy_images must be >= 0");
  cfg.train.validate();
}

DatasetSpec make_dataset_spec(const RunConfig& cfg) {
  DatasetSpec spec;
  spec.kind = dataset_kind_from_string(cfg.dataset);
  spec.root = cfg.data_root;
  spec.image_size = cfg.image_size;
  spec.channels = cfg.image_channels;
  spec.train_count = cfg.train_count > 0 ? cfg.train_count : 2000;
  spec.test_count = cfg.test_count > 0 ? cfg.test_count : 500;
  spec.seed = cfg.train.seed;
  return spec;
}

std::string run_manifest_json(const RunConfig& cfg, int64_t normal_class) {
  auto now = std::chrono::system_clock::now();
  int64_t epoch_s = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  json j{{"version", kVersion},
         {"created_unix", epoch_s},
         {"normal_class", normal_class},
         {"dataset",
          {{"kind", cfg.dataset},
           {"root", cfg.data_root},
           {"image_size", cfg.image_size},
           {"image_channels", cfg.image_channels},
           {"train_count", cfg.train_count},
           {"test_count", cfg.test_count}}},
         {"seed", cfg.train.seed},
         {"scoring",
          {{"lambda_score", cfg.lambda_score},
           {"score", cfg.score},
           {"dir_subsample", cfg.dir_subsample},
           {"dir_fit_count", cfg.dir_fit_count}}}};
  json t{{"protocol", cfg.train.protocol_id},
         {"batch_size", cfg.train.batch_size},
         {"learning_rate", cfg.train.learning_rate},
         {"adam_beta1", cfg.train.adam_beta1},
         {"adam_beta2", cfg.train.adam_beta2},
         {"iterations", cfg.train.iterations},
         {"epochs", cfg.train.epochs},
         {"checkpoint_every", cfg.train.checkpoint_every},
         {"compactness", cfg.train.compactness_enabled},
         {"pixel_restoration", cfg.train.pixel_restoration},
         {"augment_zoom", cfg.train.augment_zoom},
         {"run_dir", cfg.train.run_dir},
         {"weights", {{"cls", cfg.train.weights.cls}, {"rec", cfg.train.weights.rec}, {"cmp", cfg.train.weights.cmp}}},
         {"net",
          {{"image_size", cfg.train.net.image_size},
           {"image_channels", cfg.train.net.image_channels},
           {"latent_channels", cfg.train.net.latent_channels},
           {"base_width", cfg.train.net.base_width},
           {"padding", cfg.train.net.padding == PadMode::kZero ? "zero" : "symmetric"},
           {"use_coord", cfg.train.net.use_coord},
           {"label_dim", cfg.train.net.label_dim}}}};
  j["train"] = t;
  return j.dump(2) + "\n";
}

}  // namespace dgad
