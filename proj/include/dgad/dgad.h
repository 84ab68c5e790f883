/* Public C interface to the anomaly-detection engine.
 *
 * Usage: build a config (defaults, file, then key overrides), run one of
 * the commands, and inspect dgad_last_error() on failure.  All handles
 * are opaque; all functions are synchronous.  Error strings are
 * thread-local and remain valid until the next failing call on the same
 * thread.
 */
#ifndef DGAD_H
#define DGAD_H

#include <stddef.h>

#ifndef DGAD_API
#if defined(_WIN32)
#define DGAD_API __declspec(dllexport)
#else
#define DGAD_API __attribute__((visibility("default")))
#endif
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dgad_status {
  DGAD_OK = 0,
  DGAD_INVALID_ARGUMENT = 1, /* null handle, bad key/value, bad flag */
  DGAD_IO_ERROR = 2,         /* unreadable or unwritable files */
  DGAD_RUNTIME_ERROR = 3     /* anything raised while running a command */
} dgad_status;

typedef struct dgad_config dgad_config;

/* Library semantic version string, e.g. "0.1.0". */
DGAD_API const char* dgad_version(void);

/* Message for the most recent failure on this thread ("" if none). */
DGAD_API const char* dgad_last_error(void);

/* Fresh config populated with defaults; destroy with dgad_config_destroy. */
DGAD_API dgad_config* dgad_config_create(void);
DGAD_API void dgad_config_destroy(dgad_config* cfg);

/* Merge key=value assignments from a flat config file. */
DGAD_API dgad_status dgad_config_load_file(dgad_config* cfg, const char* path);

/* Set one key ("seed", "protocol", "run_dir", ...); unknown keys fail. */
DGAD_API dgad_status dgad_config_set(dgad_config* cfg, const char* key, const char* value);

/* Read one key back as a string into buf (NUL-terminated, truncated to
 * buf_len).  Returns DGAD_INVALID_ARGUMENT for unknown keys. */
DGAD_API dgad_status dgad_config_get(const dgad_config* cfg, const char* key, char* buf, size_t buf_len);

/* Train one model per class (or only the configured test_object class).
 * Writes checkpoints, metrics and a manifest under run_dir/class_K/. */
DGAD_API dgad_status dgad_train(const dgad_config* cfg);

/* Score the test split against existing checkpoints; writes per-class
 * eval.json, score CSVs, ROC/histogram plots, and a summary CSV under
 * run_dir/results/. */
DGAD_API dgad_status dgad_test(const dgad_config* cfg);

/* Train and evaluate every configured ablation variant; writes the
 * aggregate table under run_dir/ablate/. */
DGAD_API dgad_status dgad_ablate(const dgad_config* cfg);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DGAD_H */
