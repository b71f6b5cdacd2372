#ifndef TCD_H
#define TCD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TcdStatus {
  TCD_STATUS_OK = 0,
  TCD_STATUS_NULL_POINTER = 1,
  TCD_STATUS_INVALID_INPUT = 2,
  TCD_STATUS_NUMERICAL = 3,
  TCD_STATUS_IO = 4,
  TCD_STATUS_PARSE = 5,
  TCD_STATUS_PANIC = 6,
} TcdStatus;

typedef struct TcdConfig TcdConfig;

typedef struct TcdDiscovery TcdDiscovery;

typedef struct TcdInstance TcdInstance;

/**
 * A directed edge between lagged variables, `from_var(t - from_lag)` to
 * `to_var(t - to_lag)`.
 */
typedef struct TcdEdge {
  size_t from_var;
  size_t from_lag;
  size_t to_var;
  size_t to_lag;
} TcdEdge;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *tcd_version(void);

/**
 * Message of the last failed call on this thread, empty after a success.
 * Valid until the next call on the same thread.
 */
const char *tcd_last_error(void);

/**
 * Default configuration.
 */
struct TcdConfig *tcd_config_new(void);

/**
 * Configuration from a JSON object; missing keys take defaults.
 *
 * Safety: `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum TcdStatus tcd_config_from_json(const char *json, struct TcdConfig **out);

/**
 * Safety: `config` must come from this library and not be freed.
 */
enum TcdStatus tcd_config_set_tau_max(struct TcdConfig *config, size_t value);

/**
 * Safety: `config` must come from this library and not be freed.
 */
enum TcdStatus tcd_config_set_orderings(struct TcdConfig *config, size_t value);

/**
 * Safety: `config` must come from this library and not be freed.
 */
enum TcdStatus tcd_config_set_theta(struct TcdConfig *config, double value);

/**
 * Safety: `config` must come from this library and not be freed.
 */
enum TcdStatus tcd_config_set_alpha(struct TcdConfig *config, double value);

/**
 * Safety: `config` must come from this library and not be freed.
 */
enum TcdStatus tcd_config_set_seed(struct TcdConfig *config, uint64_t value);

/**
 * Safety: `config` must come from this library and not be freed.
 */
enum TcdStatus tcd_config_set_max_epochs(struct TcdConfig *config, size_t value);

/**
 * Safety: `config` must come from this library or be null.
 */
void tcd_config_free(struct TcdConfig *config);

/**
 * Simulate `t` steps of `d` variables with every link at lag `tau`.
 *
 * Safety: `out` must be a valid pointer.
 */
enum TcdStatus tcd_simulate(size_t t,
                            size_t d,
                            size_t tau,
                            uint64_t seed,
                            struct TcdInstance **out);

/**
 * Safety: `instance` must come from `tcd_simulate`.
 */
size_t tcd_instance_rows(const struct TcdInstance *instance);

/**
 * Safety: `instance` must come from `tcd_simulate`.
 */
size_t tcd_instance_cols(const struct TcdInstance *instance);

/**
 * Copy the series, rows times cols values, into `buf`.
 *
 * Safety: `instance` must come from `tcd_simulate`; `buf` must hold `len` doubles.
 */
enum TcdStatus tcd_instance_series(const struct TcdInstance *instance, double *buf, size_t len);

/**
 * Safety: `instance` must come from `tcd_simulate`.
 */
size_t tcd_instance_edge_count(const struct TcdInstance *instance);

/**
 * Copy the true window graph's edges into `buf`.
 *
 * Safety: `instance` must come from `tcd_simulate`; `buf` must hold `len` edges.
 */
enum TcdStatus tcd_instance_edges(const struct TcdInstance *instance,
                                  struct TcdEdge *buf,
                                  size_t len);

/**
 * Safety: `instance` must come from `tcd_simulate` or be null.
 */
void tcd_instance_free(struct TcdInstance *instance);

/**
 * Learn a window graph from one `rows x cols` series.
 *
 * Safety: `data` must hold `rows * cols` doubles; `config` may be null for the
 * defaults; `out` must be a valid pointer.
 */
enum TcdStatus tcd_discover(const double *data,
                            size_t rows,
                            size_t cols,
                            const struct TcdConfig *config,
                            struct TcdDiscovery **out);

/**
 * Safety: `result` must come from `tcd_discover`.
 */
size_t tcd_discovery_vars(const struct TcdDiscovery *result);

/**
 * Safety: `result` must come from `tcd_discover`.
 */
size_t tcd_discovery_tau_max(const struct TcdDiscovery *result);

/**
 * Safety: `result` must come from `tcd_discover`.
 */
size_t tcd_discovery_edge_count(const struct TcdDiscovery *result);

/**
 * Copy the window graph's edges into `buf`.
 *
 * Safety: `result` must come from `tcd_discover`; `buf` must hold `len` edges.
 */
enum TcdStatus tcd_discovery_edges(const struct TcdDiscovery *result,
                                   struct TcdEdge *buf,
                                   size_t len);

/**
 * Copy the `d x d` summary adjacency into `buf`; entry `(i, j)` is 1 when
 * variable `i` causes variable `j` at some lag.
 *
 * Safety: `result` must come from `tcd_discover`; `buf` must hold `len` bytes.
 */
enum TcdStatus tcd_discovery_summary(const struct TcdDiscovery *result, uint8_t *buf, size_t len);

/**
 * Graph and diagnostics as JSON. Free with `tcd_string_free`; null on
 * failure.
 *
 * Safety: `result` must come from `tcd_discover`.
 */
char *tcd_discovery_report_json(const struct TcdDiscovery *result);

/**
 * Safety: `result` must come from `tcd_discover` or be null.
 */
void tcd_discovery_free(struct TcdDiscovery *result);

/**
 * Safety: `s` must come from this library or be null.
 */
void tcd_string_free(char *s);

/**
 * Precision, recall and F1 of the edges ending at lag 0, over `d`
 * variables.
 *
 * Safety: Edge arrays must hold the given counts; the outputs must be valid
 * pointers.
 */
enum TcdStatus tcd_window_scores(const struct TcdEdge *pred,
                                 size_t n_pred,
                                 const struct TcdEdge *truth,
                                 size_t n_truth,
                                 size_t d,
                                 double *precision,
                                 double *recall,
                                 double *f1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TCD_H */
