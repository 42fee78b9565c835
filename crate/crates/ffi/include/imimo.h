#ifndef IMIMO_H
#define IMIMO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ImimoStatus {
  IMIMO_STATUS_OK = 0,
  IMIMO_STATUS_NULL_POINTER = 1,
  IMIMO_STATUS_INVALID_ARGUMENT = 2,
  IMIMO_STATUS_UNSUPPORTED_DIMENSION = 3,
  IMIMO_STATUS_UNSUPPORTED_SCHEME = 4,
  IMIMO_STATUS_NUMERICAL = 5,
  IMIMO_STATUS_INTERNAL = 6,
  IMIMO_STATUS_PANIC = 7,
  IMIMO_STATUS_BUFFER_TOO_SMALL = 8,
} ImimoStatus;

typedef enum ImimoScheme {
  IMIMO_SCHEME_ARQ = 0,
  IMIMO_SCHEME_CC = 1,
  IMIMO_SCHEME_IR = 2,
} ImimoScheme;

typedef enum ImimoOutageMethod {
  IMIMO_OUTAGE_METHOD_EXACT = 0,
  IMIMO_OUTAGE_METHOD_ASYMPTOTIC = 1,
} ImimoOutageMethod;

typedef enum ImimoAllocation {
  IMIMO_ALLOCATION_EXACT = 0,
  IMIMO_ALLOCATION_GPP = 1,
  IMIMO_ALLOCATION_EPA = 2,
} ImimoAllocation;

/**
 * Opaque link configuration.
 */
typedef struct ImimoConfig ImimoConfig;

/**
 * Opaque solver result.
 */
typedef struct ImimoReport ImimoReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `capacity`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `capacity` bytes.
 */
size_t imimo_last_error_message(char *buf, size_t capacity);

/**
 * Library version as a static NUL-terminated string.
 */
const char *imimo_version(void);

/**
 * Creates a config with `M = L`, the series ARQ coefficient and one symbol per round.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum ImimoStatus imimo_config_new(uint32_t scheme,
                                  uint32_t num_rx,
                                  size_t max_rounds,
                                  double rate,
                                  double energy_budget,
                                  struct ImimoConfig **out);

/**
 * Switches the ARQ asymptotic coefficient: 0 = series `Γ(N+1)^l`, 1 = `N^l`.
 *
 * # Safety
 * `config` must be null or a live handle from [`imimo_config_new`].
 */
enum ImimoStatus imimo_config_set_arq_coefficient(struct ImimoConfig *config, bool antenna_power);

/**
 * # Safety
 * `config` must be null or a handle from [`imimo_config_new`] not freed before.
 */
void imimo_config_free(struct ImimoConfig *config);

/**
 * Outage after `rounds` rounds of the schedule `powers[0..len]` (`len = L`).
 *
 * # Safety
 * `config` must be a live handle, `powers` valid for `len` reads, `out` for one write.
 */
enum ImimoStatus imimo_outage(const struct ImimoConfig *config,
                              const double *powers,
                              size_t len,
                              size_t rounds,
                              uint32_t method,
                              double *out);

/**
 * Per-round outage `p_out,1..p_out,L` into `out_outage` and the average energy into `out_energy`.
 *
 * # Safety
 * `powers` valid for `len` reads, `out_outage` for `capacity` writes, `out_energy` for one.
 */
enum ImimoStatus imimo_outage_profile(const struct ImimoConfig *config,
                                      const double *powers,
                                      size_t len,
                                      uint32_t method,
                                      double *out_outage,
                                      size_t capacity,
                                      double *out_energy);

/**
 * Solves for a power schedule. The report must be released with [`imimo_report_free`].
 *
 * # Safety
 * `config` must be a live handle and `out` valid for writing a pointer.
 */
enum ImimoStatus imimo_optimize(const struct ImimoConfig *config,
                                uint32_t method,
                                struct ImimoReport **out);

/**
 * Number of rounds in the report's schedule.
 *
 * # Safety
 * `report` must be a live handle, `out` valid for one write.
 */
enum ImimoStatus imimo_report_len(const struct ImimoReport *report, size_t *out);

/**
 * Copies the schedule into `out[0..capacity]`.
 *
 * # Safety
 * `report` must be a live handle, `out` valid for `capacity` writes.
 */
enum ImimoStatus imimo_report_powers(const struct ImimoReport *report,
                                     double *out,
                                     size_t capacity);

/**
 * Scalar fields of a report; any output pointer may be null to skip it.
 *
 * # Safety
 * `report` must be a live handle; non-null outputs valid for one write.
 */
enum ImimoStatus imimo_report_summary(const struct ImimoReport *report,
                                      double *objective,
                                      double *avg_energy,
                                      double *kkt_residual,
                                      bool *converged);

/**
 * # Safety
 * `report` must be null or a handle from [`imimo_optimize`] not freed before.
 */
void imimo_report_free(struct ImimoReport *report);

/**
 * Monte Carlo estimate of the outage profile; writes `L` estimates and `L`
 * standard errors and the average energy.
 *
 * # Safety
 * `powers` valid for `len` reads; `out_outage` and `out_std_error` for
 * `capacity` writes; `out_energy` for one.
 */
enum ImimoStatus imimo_simulate(const struct ImimoConfig *config,
                                const double *powers,
                                size_t len,
                                uint64_t trials,
                                uint64_t seed,
                                size_t workers,
                                double *out_outage,
                                double *out_std_error,
                                size_t capacity,
                                double *out_energy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IMIMO_H */
