#pragma once

#include <string>

#include "data/dataset.h"
#include "train/checkpoint.h"

namespace dgad {

inline constexpr const char* kVersion = "0.1.0";

// Flat key=value run configuration; every command consumes one of these
// (file first, flag overrides after).
struct RunConfig {
  // dataset
  std::string dataset = "synthetic";
  std::string data_root;
  int64_t image_size = 32;
  int64_t image_channels = 1;
  int64_t train_count = 2000;  // 0 = whole split (synthetic: count per class)
  int64_t test_count = 500;
  int64_t test_object = -1;  // class filter; -1 = every class in turn

  TrainConfig train;

  // scoring / evaluation
  double lambda_score = 10.0;
  std::string score = "both";  // rec | dir | both
  bool dir_subsample = true;
  int64_t dir_fit_count = 512;  // train samples for the concentration fit; 0 = all
  bool disc_accuracy = false;
  int64_t disc_accuracy_images = 256;  // 0 = all

  // ablation
  std::string variants = "GAN_ONLY,DGAD_MINUS_CL,DGAD_ZERO_PAD,DGAD_COORD,DGAD";

  bool force = false;
  bool resume = false;
};

// Applies one key=value assignment; unknown keys are errors.
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// Reads the value of one key back as a string; unknown keys are errors.
std::string read_config_key(const RunConfig& cfg, const std::string& key);

// key=value lines, '#' comments, blank lines ignored.
RunConfig load_config_file(const std::string& path);

// Propagates dataset geometry and protocol label width into the nested
// training config and validates everything.
void finalize_config(RunConfig& cfg);

DatasetSpec make_dataset_spec(const RunConfig& cfg);

// Reproduction manifest written into each run directory before training.
std::string run_manifest_json(const RunConfig& cfg, int64_t normal_class);

}  // namespace dgad
