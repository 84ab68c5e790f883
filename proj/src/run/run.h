#pragma once

#include "util/config.h"

namespace dgad {

// Command drivers behind the CLI and C API.  Each finalizes the config,
// resolves the class list, and throws Error on any failure.
void cmd_train(RunConfig cfg);
void cmd_test(RunConfig cfg);
void cmd_ablate(RunConfig cfg);

// {run_dir}/class_{K}
std::string class_dir(const RunConfig& cfg, int64_t cls);

// Highest-iteration ckpt-* directory; errors naming the expected path.
std::string find_latest_checkpoint(const std::string& class_dir);

}  // namespace dgad
