// Command-line front end: train / test / ablate over the C API.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dgad/dgad.h"

namespace {

struct Flags {
  std::string config;
  std::string phase;  // alias form: --phase train|test
  int test_object = -2;
  int protocol = 0;
  std::string padding;
  bool coord = false;
  bool no_compactness = false;
  std::string score;
  long long seed = -1;
  std::string run_dir;
  std::string variants;
  bool force = false;
  bool resume = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "flat key=value config file");
  cmd->add_option("--test-object,--test_object", f.test_object, "restrict to one normal class");
  cmd->add_option("--protocol", f.protocol, "transform protocol: 1, 2 or 3")->check(CLI::Range(1, 3));
  cmd->add_option("--padding", f.padding, "convolution padding: symmetric or zero");
  cmd->add_flag("--coord", f.coord, "append coordinate channels to convolutions");
  cmd->add_flag("--no-compactness", f.no_compactness, "disable the latent compactness term");
  cmd->add_option("--score", f.score, "scorer: rec, dir or both");
  cmd->add_option("--seed", f.seed, "rng seed");
  cmd->add_option("--run-dir", f.run_dir, "output directory for runs and results");
  cmd->add_option("--variants", f.variants, "comma-separated ablation variants");
  cmd->add_flag("--force", f.force, "overwrite existing run directories");
  cmd->add_flag("--resume", f.resume, "continue training from the latest checkpoint");
}

int fail_status(const char* what) {
  std::fprintf(stderr, "error: %s: %s\n", what, dgad_last_error());
  return 1;
}

int apply_flags(dgad_config* cfg, const Flags& f) {
  if (!f.config.empty() && dgad_config_load_file(cfg, f.config.c_str()) != DGAD_OK) return fail_status("config");
  auto set = [&](const char* key, const std::string& value) {
    return dgad_config_set(cfg, key, value.c_str()) == DGAD_OK ? 0 : fail_status(key);
  };
  if (f.test_object != -2 && set("test_object", std::to_string(f.test_object))) return 1;
  if (f.protocol != 0 && set("protocol", std::to_string(f.protocol))) return 1;
  if (!f.padding.empty() && set("padding", f.padding)) return 1;
  if (f.coord && set("coord", "true")) return 1;
  if (f.no_compactness && set("compactness", "false")) return 1;
  if (!f.score.empty() && set("score", f.score)) return 1;
  if (f.seed >= 0 && set("seed", std::to_string(f.seed))) return 1;
  if (!f.run_dir.empty() && set("run_dir", f.run_dir)) return 1;
  if (!f.variants.empty() && set("variants", f.variants)) return 1;
  if (f.force && set("force", "true")) return 1;
  if (f.resume && set("resume", "true")) return 1;
  return 0;
}

int run_phase(const std::string& phase, const Flags& f) {
  dgad_config* cfg = dgad_config_create();
  if (!cfg) {
    std::fprintf(stderr, "error: out of memory\n");
    return 1;
  }
  int rc = apply_flags(cfg, f);
  if (rc == 0) {
    dgad_status s;
    if (phase == "train") {
      s = dgad_train(cfg);
    } else if (phase == "test") {
      s = dgad_test(cfg);
    } else if (phase == "ablate") {
      s = dgad_ablate(cfg);
    } else {
      std::fprintf(stderr, "error: unknown phase '%s' (train, test or ablate)\n", phase.c_str());
      dgad_config_destroy(cfg);
      return 1;
    }
    if (s != DGAD_OK) rc = fail_status(phase.c_str());
  }
  dgad_config_destroy(cfg);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transformation-pretext adversarial anomaly detector"};
  app.set_version_flag("--version", std::string(dgad_version()));
  app.require_subcommand(0, 1);

  Flags f;
  CLI::App* train = app.add_subcommand("train", "train one model per normal class");
  CLI::App* test = app.add_subcommand("test", "score the test split against checkpoints");
  CLI::App* ablate = app.add_subcommand("ablate", "train and compare ablation variants");
  add_common(train, f);
  add_common(test, f);
  add_common(ablate, f);
  // Alias form without a subcommand: dgad_cli --phase test --config ...
  add_common(&app, f);
  app.add_option("--phase", f.phase, "alias for the train/test subcommands");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) return run_phase("train", f);
  if (test->parsed()) return run_phase("test", f);
  if (ablate->parsed()) return run_phase("ablate", f);
  if (!f.phase.empty()) return run_phase(f.phase, f);
  std::fprintf(stderr, "error: give a subcommand (train, test, ablate) or --phase\n%s\n", app.help().c_str());
  return 1;
}
