#ifndef STIMCLONE_H
#define STIMCLONE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScStatus {
  SC_STATUS_OK = 0,
  SC_STATUS_NULL_POINTER = 1,
  SC_STATUS_INVALID_UTF8 = 2,
  SC_STATUS_INVALID_CONFIG = 3,
  SC_STATUS_NUMERICAL = 4,
  SC_STATUS_OUT_OF_RANGE = 5,
  SC_STATUS_PANIC = 6,
} ScStatus;

typedef enum ScMode {
  SC_MODE_EXACT = 0,
  SC_MODE_MONTE_CARLO = 1,
  SC_MODE_BOTH = 2,
} ScMode;

typedef enum ScScheme {
  SC_SCHEME_N20 = 0,
  SC_SCHEME_N11 = 1,
} ScScheme;

typedef enum ScBasis {
  SC_BASIS_VH = 0,
  SC_BASIS_DIAGONAL = 1,
  SC_BASIS_CIRCULAR = 2,
} ScBasis;

typedef enum ScSource {
  SC_SOURCE_EXACT = 0,
  SC_SOURCE_SAMPLED = 1,
} ScSource;

/**
 * Opaque experiment configuration.
 */
typedef struct ScConfig ScConfig;

/**
 * Opaque scan result.
 */
typedef struct ScScan ScScan;

/**
 * One scan row. Counts are −1 when the scan drew no samples.
 */
typedef struct ScRecord {
  double delay_fs;
  double gamma;
  enum ScScheme scheme;
  enum ScBasis basis;
  double expected_rate_hz;
  double expected_count;
  int64_t sampled_count;
  int64_t trigger_count;
} ScRecord;

typedef struct ScFidelity {
  double r;
  double sigma_r;
  double fidelity;
  double sigma_fidelity;
} ScFidelity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sc_version(void);

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread; empty when nothing has failed.
 */
const char *sc_last_error_message(void);

/**
 * Parses and validates a JSON configuration (or a run manifest).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ScStatus sc_config_from_json(const char *json, struct ScConfig **out);

/**
 * The reference operating point.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ScStatus sc_config_default(struct ScConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from this library not yet freed.
 */
void sc_config_free(struct ScConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum ScStatus sc_config_set_seed(struct ScConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum ScStatus sc_config_set_mode(struct ScConfig *cfg, enum ScMode mode);

/**
 * Runs a scan on `threads` workers (0 means one per core). Output does not
 * depend on the worker count.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum ScStatus sc_scan_run(const struct ScConfig *cfg, uint32_t threads, struct ScScan **out);

/**
 * # Safety
 * `scan` must be null or a handle from this library not yet freed.
 */
void sc_scan_free(struct ScScan *scan);

/**
 * # Safety
 * `scan` must be a live handle and `len` a valid pointer.
 */
enum ScStatus sc_scan_len(const struct ScScan *scan, size_t *len);

/**
 * # Safety
 * `scan` must be a live handle and `row` a valid pointer.
 */
enum ScStatus sc_scan_get(const struct ScScan *scan, size_t index, struct ScRecord *row);

/**
 * CSV table for one basis, identical to the command-line output. Release
 * the string with [`sc_string_free`].
 *
 * # Safety
 * `scan` must be a live handle and `out` a valid pointer.
 */
enum ScStatus sc_scan_csv(const struct ScScan *scan, enum ScBasis basis, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void sc_string_free(char *s);

/**
 * Peak/base ratio and clone fidelity of one basis in a scan.
 *
 * # Safety
 * `scan` must be a live handle and `out` a valid pointer.
 */
enum ScStatus sc_scan_fidelity(const struct ScScan *scan,
                               enum ScBasis basis,
                               enum ScSource source,
                               struct ScFidelity *out);

/**
 * `F = (2R + 1)/(2R + 2)`.
 */
double sc_fidelity_from_ratio(double r);

/**
 * Exact clone and anti-clone fidelities for a single input photon with
 * overlap `gamma`, polarized along the reference state of `basis`.
 *
 * # Safety
 * `clone` and `anticlone` must be valid pointers.
 */
enum ScStatus sc_exact_fidelity(double kappa_t,
                                double dephasing,
                                double gamma,
                                enum ScBasis basis,
                                double *clone,
                                double *anticlone);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STIMCLONE_H */
