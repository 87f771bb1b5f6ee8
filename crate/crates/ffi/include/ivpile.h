#ifndef IVPILE_H
#define IVPILE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every exported call.
 */
typedef enum IvpileStatus {
  IVPILE_STATUS_OK = 0,
  IVPILE_STATUS_NULL_POINTER = 1,
  IVPILE_STATUS_INVALID_ARGUMENT = 2,
  IVPILE_STATUS_SCHEMA = 3,
  IVPILE_STATUS_DOMAIN = 4,
  IVPILE_STATUS_DEGENERATE_FIT = 5,
  IVPILE_STATUS_NUMERICAL = 6,
  IVPILE_STATUS_IO = 7,
  IVPILE_STATUS_FORMAT = 8,
  IVPILE_STATUS_PANIC = 9,
} IvpileStatus;

/**
 * Which closed-form interval to compute for a binary outcome.
 */
typedef enum IvpileBound {
  IVPILE_BOUND_BALKE_PEARL = 0,
  IVPILE_BOUND_SIDDIQUE = 1,
} IvpileBound;

typedef enum IvpileMethod {
  IVPILE_METHOD_IV_PILE = 0,
  IVPILE_METHOD_IV_PILE_SPLIT = 1,
  IVPILE_METHOD_PLUG_IN = 2,
  IVPILE_METHOD_OWL = 3,
  IVPILE_METHOD_COIN_FLIP = 4,
} IvpileMethod;

typedef enum IvpileNuisance {
  IVPILE_NUISANCE_FOREST = 0,
  IVPILE_NUISANCE_LOGIT = 1,
} IvpileNuisance;

/**
 * A fitted or loaded treatment rule. Opaque.
 */
typedef struct IvpileRule IvpileRule;

/**
 * Observations with a binary outcome. Opaque.
 */
typedef struct IvpileTable IvpileTable;

/**
 * Fit settings. `sigma <= 0` selects the linear kernel.
 */
typedef struct IvpileFitConfig {
  enum IvpileMethod method;
  enum IvpileNuisance nuisance;
  enum IvpileBound bound;
  double delta;
  double sigma;
  double lambda;
  uint64_t seed;
} IvpileFitConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ivpile_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated, truncated to
 * `cap - 1` bytes) and returns the full message length without the terminator. Passing a null
 * `buf` or zero `cap` only queries the length.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t ivpile_last_error_message(char *buf, size_t cap);

/**
 * Effect interval from the eight cell probabilities. `plus` and `minus` hold the instrument
 * arms z = +1 and z = -1, each ordered (y,a) = (+,+), (+,-), (-,+), (-,-).
 *
 * # Safety
 * `plus` and `minus` must point to 4 doubles; `out_l` and `out_u` must be writable.
 */
enum IvpileStatus ivpile_bounds(enum IvpileBound bound,
                                const double *plus,
                                const double *minus,
                                double *out_l,
                                double *out_u);

/**
 * Builds a table from row-major covariates `x` (n by d) and columns `z`, `a`, `y` in {-1, +1}.
 *
 * # Safety
 * `x` must point to `n * d` doubles, `z`, `a`, `y` to `n` doubles each; `out` must be writable.
 */
enum IvpileStatus ivpile_table_new(const double *x,
                                   size_t n,
                                   size_t d,
                                   const double *z,
                                   const double *a,
                                   const double *y,
                                   struct IvpileTable **out);

/**
 * # Safety
 * `table` must be null or a handle from `ivpile_table_new` not yet freed.
 */
void ivpile_table_free(struct IvpileTable *table);

/**
 * Default settings: IV-PILE with forest nuisance, Balke-Pearl bounds, Gaussian kernel.
 */
struct IvpileFitConfig ivpile_fit_config_default(void);

/**
 * Fits a rule on `table`.
 *
 * # Safety
 * `table` must be a live handle, `cfg` must point to a config and `out` must be writable.
 */
enum IvpileStatus ivpile_fit(const struct IvpileTable *table,
                             const struct IvpileFitConfig *cfg,
                             struct IvpileRule **out);

/**
 * Writes decision values for `n` rows of row-major covariates into `out_values`. The
 * recommendation is +1 where the value is positive and -1 otherwise.
 *
 * # Safety
 * `rule` must be a live handle, `x` must point to `n * d` doubles and `out_values` to `n`
 * writable doubles.
 */
enum IvpileStatus ivpile_rule_decisions(const struct IvpileRule *rule,
                                        const double *x,
                                        size_t n,
                                        size_t d,
                                        double *out_values);

/**
 * Saves `rule` as a text rule file.
 *
 * # Safety
 * `rule` must be a live handle and `file` a NUL-terminated path.
 */
enum IvpileStatus ivpile_rule_save(const struct IvpileRule *rule, const char *file);

/**
 * Loads a rule file written by `ivpile_rule_save` or the command-line tool.
 *
 * # Safety
 * `file` must be a NUL-terminated path and `out` writable.
 */
enum IvpileStatus ivpile_rule_load(const char *file, struct IvpileRule **out);

/**
 * # Safety
 * `rule` must be null or a handle not yet freed.
 */
void ivpile_rule_free(struct IvpileRule *rule);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IVPILE_H */
