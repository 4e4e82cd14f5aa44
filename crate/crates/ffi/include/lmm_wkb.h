#ifndef LMM_WKB_H
#define LMM_WKB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Estimator levels accepted by the pricing calls.
 */
#define LMM_LEVEL_LOGNORMAL 0

#define LMM_LEVEL_WKB0 1

#define LMM_LEVEL_WKB1 2

#define LMM_LEVEL_EULER 3

/*
 Pass as `delta_component` to request a price.
 */
#define LMM_PRICE -1

typedef enum LmmStatus {
  LMM_STATUS_OK = 0,
  LMM_STATUS_NULL_POINTER = 1,
  LMM_STATUS_INVALID_PARAMETER = 2,
  LMM_STATUS_DOMAIN = 3,
  LMM_STATUS_NUMERIC = 4,
  LMM_STATUS_CALIBRATION = 5,
  LMM_STATUS_CONFIG = 6,
  LMM_STATUS_IO = 7,
  /*
   No exercise policy has been calibrated or loaded.
   */
  LMM_STATUS_NO_POLICY = 8,
  LMM_STATUS_PANIC = 9,
} LmmStatus;

/*
 Opaque model handle.
 */
typedef struct LmmEngine LmmEngine;

/*
 Monte Carlo estimate in basis points of unit notional.
 */
typedef struct LmmEstimate {
  double value;
  double std_dev;
  uint64_t samples;
} LmmEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call into the library on this thread.
 */
const char *lmm_last_error(void);

/*
 Case-study model with `n` semi-annual rates starting at `t1`.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum LmmStatus lmm_engine_new_case_study(size_t n, double t1, struct LmmEngine **out);

/*
 Model from a `key = value` experiment file.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid handle slot.
 */
enum LmmStatus lmm_engine_from_config(const char *path, struct LmmEngine **out);

/*
 Releases an engine; null is ignored.

 # Safety
 `engine` must come from this library and not be used afterwards.
 */
void lmm_engine_free(struct LmmEngine *engine);

/*
 Number of forward rates, or 0 for a null handle.

 # Safety
 `engine` must be null or a live handle.
 */
size_t lmm_engine_num_rates(const struct LmmEngine *engine);

/*
 Calibrates exercise thresholds on `paths` pre-simulated paths.

 # Safety
 `engine` must be a live handle.
 */
enum LmmStatus lmm_engine_calibrate_policy(struct LmmEngine *engine, size_t paths, uint64_t seed);

/*
 Loads a policy file written by the command-line tool.

 # Safety
 `engine` must be a live handle and `path` a NUL-terminated string.
 */
enum LmmStatus lmm_engine_load_policy(struct LmmEngine *engine, const char *path);

/*
 Writes the current policy to `path`.

 # Safety
 `engine` must be a live handle and `path` a NUL-terminated string.
 */
enum LmmStatus lmm_engine_save_policy(const struct LmmEngine *engine, const char *path);

/*
 European swaption price, or its Delta with respect to rate
 `delta_component` (0-based) unless that is `LMM_PRICE`.

 # Safety
 `engine` must be a live handle and `out` writable.
 */
enum LmmStatus lmm_european(const struct LmmEngine *engine,
                            int32_t level,
                            size_t samples,
                            uint64_t seed,
                            int64_t delta_component,
                            struct LmmEstimate *out);

/*
 Bermudan counterpart of [`lmm_european`]; needs a policy.

 # Safety
 `engine` must be a live handle and `out` writable.
 */
enum LmmStatus lmm_bermudan(const struct LmmEngine *engine,
                            int32_t level,
                            size_t samples,
                            uint64_t seed,
                            int64_t delta_component,
                            struct LmmEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LMM_WKB_H */
