#include "dgad/dgad.h"

#include <cstring>
#include <string>

#include "run/run.h"
#include "util/config.h"

// Exception-to-status boundary around the C++ engine.

namespace {

thread_local std::string g_last_error;

dgad_status set_error(dgad_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

dgad_status run_guarded(const dgad_config* cfg, void (*fn)(dgad::RunConfig));

}  // namespace

struct dgad_config {
  dgad::RunConfig cfg;
};

extern "C" {

const char* dgad_version(void) { return dgad::kVersion; }

const char* dgad_last_error(void) { return g_last_error.c_str(); }

dgad_config* dgad_config_create(void) { return new (std::nothrow) dgad_config(); }

void dgad_config_destroy(dgad_config* cfg) { delete cfg; }

dgad_status dgad_config_load_file(dgad_config* cfg, const char* path) {
  if (!cfg || !path) return set_error(DGAD_INVALID_ARGUMENT, "null argument");
  try {
    cfg->cfg = dgad::load_config_file(path);
    return DGAD_OK;
  } catch (const std::exception& e) {
    return set_error(DGAD_IO_ERROR, e.what());
  }
}

dgad_status dgad_config_set(dgad_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return set_error(DGAD_INVALID_ARGUMENT, "null argument");
  try {
    dgad::apply_config_kv(cfg->cfg, key, value);
    return DGAD_OK;
  } catch (const std::exception& e) {
    return set_error(DGAD_INVALID_ARGUMENT, e.what());
  }
}

dgad_status dgad_config_get(const dgad_config* cfg, const char* key, char* buf, size_t buf_len) {
  if (!cfg || !key || !buf || buf_len == 0) return set_error(DGAD_INVALID_ARGUMENT, "null argument");
  try {
    std::string v = dgad::read_config_key(cfg->cfg, key);
    std::strncpy(buf, v.c_str(), buf_len - 1);
    buf[buf_len - 1] = '\0';
    return DGAD_OK;
  } catch (const std::exception& e) {
    return set_error(DGAD_INVALID_ARGUMENT, e.what());
  }
}

dgad_status dgad_train(const dgad_config* cfg) { return run_guarded(cfg, dgad::cmd_train); }

dgad_status dgad_test(const dgad_config* cfg) { return run_guarded(cfg, dgad::cmd_test); }

dgad_status dgad_ablate(const dgad_config* cfg) { return run_guarded(cfg, dgad::cmd_ablate); }

}  // extern "C"

namespace {

dgad_status run_guarded(const dgad_config* cfg, void (*fn)(dgad::RunConfig)) {
  if (!cfg) return set_error(DGAD_INVALID_ARGUMENT, "null config");
  try {
    fn(cfg->cfg);
    return DGAD_OK;
  } catch (const std::exception& e) {
    return set_error(DGAD_RUNTIME_ERROR, e.what());
  } catch (...) {
    return set_error(DGAD_RUNTIME_ERROR, "unknown error");
  }
}

}  // namespace
